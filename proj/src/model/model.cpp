#include "longdr/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "longdr/common/errors.hpp"
#include "longdr/common/numeric.hpp"

namespace longdr::model {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
    if (hidden == 0 || heads == 0) throw ConfigError("hidden size and heads must be positive");
    if (hidden % heads != 0)
        throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " +
                          std::to_string(heads) + " heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (covariate_dim == 0 || tau == 0) throw ConfigError("covariate_dim and tau must be positive");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    if (!(target_rate > 0.0 && target_rate <= 1.0)) throw ConfigError("target_rate must lie in (0, 1]");
    if (ff_multiplier == 0 || horizon_heads == 0)
        throw ConfigError("ff_multiplier and horizon_heads must be positive");
}

Standardizer Standardizer::fit(const std::vector<const synth::Trajectory*>& units, std::size_t d) {
    Standardizer st = identity(d);
    if (units.empty()) return st;
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    std::size_t rows = 0;
    for (const auto* tr : units) {
        for (const auto& row : tr->covariates) {
            for (std::size_t j = 0; j < d; ++j) sum[j] += row[j];
            ++rows;
        }
    }
    for (std::size_t j = 0; j < d; ++j) st.mean[j] = sum[j] / static_cast<double>(rows);
    for (const auto* tr : units)
        for (const auto& row : tr->covariates)
            for (std::size_t j = 0; j < d; ++j) sq[j] += (row[j] - st.mean[j]) * (row[j] - st.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(sq[j] / static_cast<double>(rows));
        st.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return st;
}

Standardizer Standardizer::identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

Batch make_batch(const std::vector<const synth::Trajectory*>& units, const Standardizer& st) {
    Batch b;
    b.n = units.size();
    b.tau = units.empty() ? 0 : units.front()->covariates.size();
    b.d = st.mean.size();
    b.covariates = Tensor(Shape{b.n * b.tau, b.d});
    b.actions = Tensor(Shape{b.n * b.tau, 1});
    b.factual.resize(b.n * b.tau);
    for (std::size_t u = 0; u < b.n; ++u) {
        const auto& tr = *units[u];
        if (tr.covariates.size() != b.tau || tr.actions.size() != b.tau)
            throw ContractError("make_batch: units disagree on the horizon");
        for (std::size_t t = 0; t < b.tau; ++t) {
            const std::size_t r = u * b.tau + t;
            if (tr.covariates[t].size() != b.d) throw DimensionError("make_batch: covariate width mismatch");
            for (std::size_t j = 0; j < b.d; ++j) b.covariates[r * b.d + j] = st.apply(j, tr.covariates[t][j]);
            b.actions[r] = tr.actions[t];
            b.factual[r] = tr.actions[t];
        }
    }
    return b;
}

namespace {

constexpr std::size_t kEmbedParams = 5;
constexpr std::size_t kBlockParams = 13;

enum Block : std::size_t { ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2 };

std::size_t block_param(std::size_t layer, Block which) { return kEmbedParams + layer * kBlockParams + which; }

struct HeadIndex {
    std::size_t final_g, final_b, q_w, q_b, g_w, g_b, s_w, s_b;
};

HeadIndex head_index(std::size_t layers) {
    const std::size_t base = kEmbedParams + layers * kBlockParams;
    return {base, base + 1, base + 2, base + 3, base + 4, base + 5, base + 6, base + 7};
}

// pe[pos][2i] = sin(pos / 10000^(2i/h)), pe[pos][2i+1] = cos(...), as a [seq, hidden] table.
std::vector<double> positional_table(std::size_t seq, std::size_t hidden) {
    std::vector<double> pe(seq * hidden);
    for (std::size_t col = 0; col < hidden; ++col) {
        const double i2 = static_cast<double>(col - col % 2);
        const double freq = std::pow(10000.0, i2 / static_cast<double>(hidden));
        for (std::size_t pos = 0; pos < seq; ++pos) {
            const double angle = static_cast<double>(pos) / freq;
            pe[pos * hidden + col] = col % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

// Sigmoid head output kept strictly inside (0, 1) even for saturated logits.
double head_probability(double logit) { return clamp_probability(expit(logit), 1e-12); }

Var feed_forward(Var x, const std::vector<Var>& P, std::size_t l) {
    auto h = ad::relu(ad::linear(x, P[block_param(l, w1)], P[block_param(l, b1)]));
    return ad::linear(h, P[block_param(l, w2)], P[block_param(l, b2)]);
}

} // namespace

NuisanceModel NuisanceModel::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    NuisanceModel m;
    m.config_ = config;
    m.standardizer_ = Standardizer::identity(config.covariate_dim);
    std::mt19937_64 rng(seed);
    const std::size_t H = config.hidden, d = config.covariate_dim, M = config.horizon_heads;
    const std::size_t F = H * config.ff_multiplier;

    auto weight = [&](std::string name, std::size_t fan_in, std::size_t fan_out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor w(Shape{fan_in, fan_out});
        for (double& x : w.data()) x = u(rng);
        m.params_.push_back({std::move(name), std::move(w)});
    };
    auto vec = [&](std::string name, std::size_t size, double fill) {
        m.params_.push_back({std::move(name), Tensor(Shape{size}, fill)});
    };

    weight("embed.L.w", d, H);
    vec("embed.L.b", H, 0.0);
    weight("embed.A.w", 1, H);
    vec("embed.A.b", H, 0.0);
    weight("embed.type", H, 3); // drawn as [H,3] for the fan-in bound, stored as [3,H]
    {
        auto& t = m.params_.back().value;
        Tensor tt(Shape{3, H});
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t k = 0; k < 3; ++k) tt[k * H + i] = t[i * 3 + k];
        t = std::move(tt);
    }
    for (std::size_t l = 0; l < config.layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        vec(p + "ln1.g", H, 1.0);
        vec(p + "ln1.b", H, 0.0);
        weight(p + "attn.wq", H, H);
        weight(p + "attn.wk", H, H);
        weight(p + "attn.wv", H, H);
        weight(p + "attn.wo", H, H);
        vec(p + "attn.bo", H, 0.0);
        vec(p + "ln2.g", H, 1.0);
        vec(p + "ln2.b", H, 0.0);
        weight(p + "ff.w1", H, F);
        vec(p + "ff.b1", F, 0.0);
        weight(p + "ff.w2", F, H);
        vec(p + "ff.b2", H, 0.0);
    }
    vec("final.ln.g", H, 1.0);
    vec("final.ln.b", H, 0.0);
    weight("head.Q.w", H, 1);
    vec("head.Q.b", 1, 0.0);
    weight("head.G.w", H, M);
    vec("head.G.b", M, 0.0);
    weight("head.S.w", H, M * d);
    vec("head.S.b", M * d, 0.0);
    if (config.zero_heads)
        for (auto& p : m.params_)
            if (p.name.rfind("head.", 0) == 0) std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
    return m;
}

TapedForward NuisanceModel::forward(Tape& tape, const Batch& batch, const ForwardOptions& opts) const {
    return run(tape, batch, opts, nullptr, nullptr);
}

TapedForward NuisanceModel::run(Tape& tape, const Batch& batch, const ForwardOptions& opts,
                                std::vector<Var>* keys, std::vector<Var>* values) const {
    const auto& c = config_;
    if (batch.tau != c.tau) {
        throw ContractError("batch horizon " + std::to_string(batch.tau) + " does not match model horizon " +
                            std::to_string(c.tau));
    }
    if (batch.d != c.covariate_dim) throw ContractError("batch covariate width does not match the model");
    const std::size_t n = batch.n, tau = c.tau, H = c.hidden, seq = 2 * tau;

    TapedForward out;
    out.params.reserve(params_.size());
    for (const auto& p : params_) {
        Tensor v = p.value;
        v.set_requires_grad(opts.params_require_grad);
        out.params.push_back(tape.leaf(std::move(v)));
    }
    const auto& P = out.params;
    out.covariates = tape.leaf(Tensor(batch.covariates).set_requires_grad(opts.inputs_require_grad));
    out.actions = tape.leaf(Tensor(batch.actions).set_requires_grad(opts.inputs_require_grad));

    const Var l_tok = ad::linear(out.covariates, P[0], P[1]);
    const Var a_tok = ad::linear(out.actions, P[2], P[3]);
    std::vector<std::size_t> order(n * seq), kinds(n * seq), l_rows(n * tau), a_rows(n * tau);
    Tensor pe(Shape{n * seq, H});
    const auto table = positional_table(seq, H);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t t = 0; t < tau; ++t) {
            const std::size_t r = u * tau + t, li = u * seq + 2 * t, ai = li + 1;
            order[li] = r;
            order[ai] = n * tau + r;
            kinds[li] = 0;
            kinds[ai] = 1;
            l_rows[r] = li;
            a_rows[r] = ai;
        }
        std::copy(table.begin(), table.end(), pe.raw() + u * seq * H);
    }
    Var x = ad::gather_rows(ad::concat_rows(l_tok, a_tok), std::move(order));
    x = ad::add(x, ad::gather_rows(P[4], std::move(kinds)));
    x = ad::add(x, tape.constant(std::move(pe)));

    auto maybe_dropout = [&](Var v) {
        return opts.dropout_rng ? ad::dropout(v, c.dropout, *opts.dropout_rng) : v;
    };
    for (std::size_t l = 0; l < c.layers; ++l) {
        const Var h = ad::layer_norm(x, P[block_param(l, ln1_g)], P[block_param(l, ln1_b)]);
        const Var q = ad::matmul(h, P[block_param(l, wq)]);
        const Var k = ad::matmul(h, P[block_param(l, wk)]);
        const Var v = ad::matmul(h, P[block_param(l, wv)]);
        if (keys) keys->push_back(k);
        if (values) values->push_back(v);
        const Var att = ad::causal_attention(q, k, v, n, seq, c.heads);
        x = ad::add(x, maybe_dropout(ad::linear(att, P[block_param(l, wo)], P[block_param(l, bo)])));
        const Var h2 = ad::layer_norm(x, P[block_param(l, ln2_g)], P[block_param(l, ln2_b)]);
        x = ad::add(x, maybe_dropout(feed_forward(h2, P, l)));
    }
    const auto hi = head_index(c.layers);
    const Var z = ad::layer_norm(x, P[hi.final_g], P[hi.final_b]);
    const Var z_l = ad::gather_rows(z, std::move(l_rows));
    const Var z_a = ad::gather_rows(z, std::move(a_rows));
    out.q_logit = ad::linear(z_a, P[hi.q_w], P[hi.q_b]);
    out.g_logit = ad::linear(z_l, P[hi.g_w], P[hi.g_b]);
    out.s = ad::linear(z_a, P[hi.s_w], P[hi.s_b]);
    return out;
}

NuisanceEval NuisanceModel::evaluate(const Batch& batch, const std::vector<int>& planned) const {
    const auto& c = config_;
    const std::size_t n = batch.n, tau = c.tau, d = c.covariate_dim, H = c.hidden, seq = 2 * tau;
    if (planned.size() != n * batch.tau) throw ContractError("evaluate: planned actions do not cover the batch");

    Tape tape;
    std::vector<Var> keys, values;
    const TapedForward f = run(tape, batch, {nullptr, false, false}, &keys, &values);
    const auto& P = f.params;

    NuisanceEval ev(n, tau, d);
    const Tensor& ql = f.q_logit.value();
    const Tensor& gl = f.g_logit.value();
    const Tensor& sv = f.s.value();
    const std::size_t M = c.horizon_heads;
    for (std::size_t r = 0; r < n * tau; ++r) {
        ev.q_obs[r] = head_probability(ql[r]);
        ev.g[r] = head_probability(gl[r * M]);
        for (std::size_t j = 0; j < d; ++j) ev.s[r * d + j] = sv[r * M * d + j];
        ev.factual[r] = batch.factual[r];
        ev.planned[r] = planned[r];
    }

    // Branch pass: one substituted action token per (unit, t) attending to the
    // factual prefix cached above.
    bool any_off_plan = false;
    for (std::size_t r = 0; r < n * tau; ++r) any_off_plan |= planned[r] != batch.factual[r];
    if (!any_off_plan) {
        ev.q_cf = ev.q_obs;
        return ev;
    }
    Tensor acts(Shape{n * tau, 1});
    Tensor base(Shape{n * tau, H});
    std::vector<std::size_t> positions(n * tau);
    const Tensor& type = params_[4].value;
    const auto table = positional_table(seq, H);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t t = 0; t < tau; ++t) {
            const std::size_t r = u * tau + t;
            acts[r] = planned[r];
            positions[r] = 2 * t + 1;
            for (std::size_t j = 0; j < H; ++j) base[r * H + j] = type[H + j] + table[(2 * t + 1) * H + j];
        }
    }
    Var xb = ad::add(ad::linear(tape.constant(std::move(acts)), P[2], P[3]), tape.constant(std::move(base)));
    for (std::size_t l = 0; l < c.layers; ++l) {
        const Var h = ad::layer_norm(xb, P[block_param(l, ln1_g)], P[block_param(l, ln1_b)]);
        const Var q = ad::matmul(h, P[block_param(l, wq)]);
        const Var k = ad::matmul(h, P[block_param(l, wk)]);
        const Var v = ad::matmul(h, P[block_param(l, wv)]);
        const Var att = ad::prefix_attention(q, k, v, keys[l], values[l], seq, c.heads, tau, positions);
        xb = ad::add(xb, ad::linear(att, P[block_param(l, wo)], P[block_param(l, bo)]));
        const Var h2 = ad::layer_norm(xb, P[block_param(l, ln2_g)], P[block_param(l, ln2_b)]);
        xb = ad::add(xb, feed_forward(h2, P, l));
    }
    const auto hi = head_index(c.layers);
    const Var zb = ad::layer_norm(xb, P[hi.final_g], P[hi.final_b]);
    const Tensor& qb = ad::linear(zb, P[hi.q_w], P[hi.q_b]).value();
    for (std::size_t r = 0; r < n * tau; ++r)
        ev.q_cf[r] = planned[r] == batch.factual[r] ? ev.q_obs[r] : head_probability(qb[r]);
    return ev;
}

std::size_t NuisanceModel::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.value.size();
    return total;
}

bool NuisanceModel::operator==(const NuisanceModel& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value))
            return false;
    }
    return standardizer_.mean == other.standardizer_.mean && standardizer_.scale == other.standardizer_.scale &&
           to_json(config_) == to_json(other.config_);
}

void polyak_update(const NuisanceModel& live, NuisanceModel& target, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("polyak_update: beta must lie in [0, 1]");
    const auto& src = live.params();
    auto& dst = target.params();
    if (src.size() != dst.size()) throw ContractError("polyak_update: parameter sets differ in size");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!src[i].value.same_shape(dst[i].value) || src[i].name != dst[i].name)
            throw ContractError("polyak_update: parameter '" + src[i].name + "' does not match the target");
    }
    if (beta == 0.0) return;
    for (std::size_t i = 0; i < src.size(); ++i) {
        auto& t = dst[i].value;
        const auto& s = src[i].value;
        if (beta == 1.0) {
            t = s;
            continue;
        }
        // theta' + beta (theta - theta'): the same convex combination, but exact
        // when the two already agree.
        for (std::size_t j = 0; j < t.size(); ++j) t[j] += beta * (s[j] - t[j]);
    }
}

} // namespace longdr::model
