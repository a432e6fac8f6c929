#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "longdr/common/numeric.hpp"
#include "longdr/estimators/estimators.hpp"

namespace longdr::est {

using ad::Shape;
using ad::Tensor;
using ad::Var;

LossVars training_losses(Var q_prob, Var g_logit, Var s, const LossInputs& in, double alpha, bool use_simulator) {
    ad::Tape& tape = *q_prob.tape;
    const std::size_t rows = in.n * in.tau, M = in.horizon_heads, d = in.d;
    if (in.targets.size() != rows || in.factual.size() != rows)
        throw ContractError("training_losses: targets and actions must cover every (unit, t)");
    const double inv_n = 1.0 / static_cast<double>(in.n);

    LossVars out;
    const auto attributed = [](const char* name, auto&& build) {
        try {
            Var v = build();
            if (!std::isfinite(v.value().item())) throw TrainingError(std::string("non-finite ") + name + " loss");
            return v;
        } catch (const DomainError& e) {
            throw TrainingError(std::string("non-finite ") + name + " loss: " + e.what());
        }
    };
    out.q = attributed("L_Q", [&] {
        Tensor targets(Shape{rows, 1}, in.targets);
        return ad::scale(ad::sum(ad::square(ad::sub(q_prob, tape.constant(std::move(targets))))), inv_n);
    });

    // Head m at step t predicts A_{t+m}; steps past the horizon are masked.
    Tensor a_next(Shape{rows, M}), a_mask(Shape{rows, M});
    for (std::size_t u = 0; u < in.n; ++u)
        for (std::size_t t = 0; t < in.tau; ++t)
            for (std::size_t m = 0; m < M && t + m < in.tau; ++m) {
                a_next[(u * in.tau + t) * M + m] = in.factual[u * in.tau + t + m];
                a_mask[(u * in.tau + t) * M + m] = 1.0;
            }
    out.g = attributed("L_G", [&] {
        return ad::scale(ad::sum(ad::mul(ad::bce_with_logits(g_logit, tape.constant(std::move(a_next))),
                                         tape.constant(std::move(a_mask)))),
                         inv_n);
    });

    if (use_simulator) {
        // Head m at step t predicts L_{t+1+m}; the last step has no successor.
        Tensor l_next(Shape{rows, M * d}), l_mask(Shape{rows, M * d});
        for (std::size_t u = 0; u < in.n; ++u)
            for (std::size_t t = 0; t < in.tau; ++t)
                for (std::size_t m = 0; m < M && t + 1 + m < in.tau; ++m)
                    for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t col = (u * in.tau + t) * M * d + m * d + j;
                        l_next[col] = in.covariates[(u * in.tau + t + 1 + m) * d + j];
                        l_mask[col] = 1.0;
                    }
        out.s = attributed("L_S", [&] {
            const Var diff = ad::sub(s, tape.constant(std::move(l_next)));
            return ad::scale(ad::sum(ad::mul(ad::square(diff), tape.constant(std::move(l_mask)))),
                             inv_n / static_cast<double>(d));
        });
    } else {
        out.s = tape.constant(Tensor::scalar(0.0));
    }
    out.total = ad::add(out.q, ad::scale(ad::add(out.g, out.s), alpha));
    return out;
}

namespace {

// Rows of a standardised batch for a subset of its units.
model::Batch sub_batch(const model::Batch& full, const std::vector<std::size_t>& units) {
    model::Batch b;
    b.n = units.size();
    b.tau = full.tau;
    b.d = full.d;
    b.covariates = Tensor(Shape{b.n * b.tau, b.d});
    b.actions = Tensor(Shape{b.n * b.tau, 1});
    b.factual.resize(b.n * b.tau);
    for (std::size_t i = 0; i < units.size(); ++i) {
        const std::size_t src = units[i] * full.tau, dst = i * full.tau;
        std::copy_n(full.covariates.raw() + src * full.d, full.tau * full.d, b.covariates.raw() + dst * full.d);
        std::copy_n(full.actions.raw() + src, full.tau, b.actions.raw() + dst);
        std::copy_n(full.factual.begin() + static_cast<long>(src), full.tau, b.factual.begin() + static_cast<long>(dst));
    }
    return b;
}

} // namespace

TrainResult train(const std::vector<const synth::Trajectory*>& units, const synth::TreatmentPlan& plan,
                  const model::ModelConfig& model_config, const TrainConfig& config) {
    model_config.validate();
    plan.validate(model_config.tau);
    if (units.empty()) throw ContractError("train: no training units");
    if (config.batch == 0) throw ConfigError("batch size must be positive");
    if (!(config.g_min > 0.0 && config.g_min < 0.5)) throw ConfigError("g_min must lie in (0, 0.5)");

    std::seed_seq loop_seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 23u};
    std::mt19937_64 rng(loop_seq);

    TrainResult res;
    res.live = model::NuisanceModel::init(model_config, config.seed);
    res.live.standardizer() = model::Standardizer::fit(units, model_config.covariate_dim);
    res.target = res.live;

    const auto full = model::make_batch(units, res.live.standardizer());
    const std::size_t n = units.size(), tau = model_config.tau, d = model_config.covariate_dim;
    std::vector<int> planned(n * tau);
    std::vector<double> outcomes(n);
    for (std::size_t u = 0; u < n; ++u) {
        const auto a = policy_actions(plan, *units[u]);
        std::copy(a.begin(), a.end(), planned.begin() + static_cast<long>(u * tau));
        outcomes[u] = units[u]->outcome;
    }

    auto opt = ad::make_optimizer(res.live.params(), config.optimizer, config.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const bool use_dropout = model_config.dropout > 0.0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.xi.assign(tau, 0.0);
        std::size_t batches = 0, clip_total = 0, clip_count = 0;
        for (std::size_t start = 0; start < n; start += config.batch) {
            const std::size_t stop = std::min(n, start + config.batch);
            const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                               order.begin() + static_cast<long>(stop));
            const auto b = sub_batch(full, idx);
            const std::size_t m = idx.size();
            std::vector<int> planned_b(m * tau);
            std::vector<double> y_b(m);
            for (std::size_t i = 0; i < m; ++i) {
                std::copy_n(planned.begin() + static_cast<long>(idx[i] * tau), tau,
                            planned_b.begin() + static_cast<long>(i * tau));
                y_b[i] = outcomes[idx[i]];
            }

            // Targets from the lagged network, outside the gradient path.
            auto ev = res.target.evaluate(b, planned_b);
            const PseudoOutcomeTable tab = config.use_sdr
                                               ? sdr_targets(ev, compute_weights(ev, config.g_min), y_b, config.clip)
                                               : ice_targets(ev, y_b);
            LossInputs in;
            in.n = m;
            in.tau = tau;
            in.d = d;
            in.horizon_heads = model_config.horizon_heads;
            in.targets.resize(m * tau);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < tau; ++t) in.targets[i * tau + t] = tab.target_for(i, t);
            in.factual = b.factual;
            in.covariates = b.covariates.storage();
            clip_count += static_cast<std::size_t>(std::llround(tab.clip_rate() * static_cast<double>(m * (tau - 1))));
            clip_total += m * (tau - 1);

            ad::Tape tape;
            ad::Gradients grads;
            LossVars loss;
            Tensor q_now;
            try {
                const auto f = res.live.forward(tape, b, {use_dropout ? &rng : nullptr, true, false});
                const Var q_prob = ad::sigmoid(f.q_logit);
                loss = training_losses(q_prob, f.g_logit, f.s, in, model_config.alpha, config.use_simulator);
                q_now = q_prob.value();
                grads = tape.backward(loss.total);
                std::vector<Tensor> g;
                g.reserve(f.params.size());
                for (const auto& p : f.params) g.push_back(grads.of(p));
                ad::optimizer_step(res.live.params(), g, opt);
            } catch (const DomainError& e) {
                throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch + 1) + ": " +
                                           e.what(),
                                       std::move(res.trace), std::make_shared<model::NuisanceModel>(res.live));
            } catch (const TrainingDiverged&) {
                throw;
            } catch (const TrainingError& e) {
                throw TrainingDiverged(std::string("epoch ") + std::to_string(epoch + 1) + ": " + e.what(),
                                       std::move(res.trace), std::make_shared<model::NuisanceModel>(res.live));
            }
            model::polyak_update(res.live, res.target, model_config.target_rate);

            rec.loss += loss.total.value().item();
            rec.loss_q += loss.q.value().item();
            rec.loss_g += loss.g.value().item();
            rec.loss_s += loss.s.value().item();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < tau; ++t) {
                    const double e = q_now[i * tau + t] - in.targets[i * tau + t];
                    rec.xi[t] += e * e;
                }
            ++batches;
        }
        const double nb = static_cast<double>(batches);
        rec.loss /= nb;
        rec.loss_q /= nb;
        rec.loss_g /= nb;
        rec.loss_s /= nb;
        for (double& x : rec.xi) x = std::sqrt(x / static_cast<double>(n));
        rec.clip_rate = clip_total == 0 ? 0.0 : static_cast<double>(clip_count) / static_cast<double>(clip_total);
        res.trace.epochs.push_back(std::move(rec));
    }
    return res;
}

} // namespace longdr::est
