#include "longdr/synth/dgp.hpp"

#include <algorithm>
#include <limits>

#include <json.hpp>

#include "longdr/common/errors.hpp"
#include "simulator.hpp"

namespace longdr::synth {

Variant parse_variant(const std::string& s) {
    if (s == "limited") return Variant::limited;
    if (s == "expanded") return Variant::expanded;
    throw ConfigError("unknown variant '" + s + "' (expected limited or expanded)");
}

CoefficientRule parse_coefficient_rule(const std::string& s) {
    if (s == "shifted") return CoefficientRule::shifted;
    if (s == "paper_singular") return CoefficientRule::paper_singular;
    throw ConfigError("unknown coefficient rule '" + s + "' (expected shifted or paper_singular)");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

std::string to_string(Variant v) { return v == Variant::limited ? "limited" : "expanded"; }

std::string to_string(CoefficientRule r) {
    return r == CoefficientRule::shifted ? "shifted" : "paper_singular";
}

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "train";
}

void DgpConfig::validate() const {
    if (tau < 2) throw ConfigError("tau must be at least 2");
    if (n < 1) throw ConfigError("n must be at least 1");
    if (lag < 1) throw ConfigError("lag must be at least 1");
    if (!(noise_std_ay > 0.0) || !(noise_std_z > 0.0)) throw ConfigError("noise stds must be positive");
    if (n_val + n_test >= n) throw ConfigError("val + test units leave no training units");
}

std::size_t DgpConfig::covariate_dim() const {
    return kBaseDim + (variant == Variant::expanded ? kLatentDim : 0) + 1;
}

std::string DgpConfig::canonical() const {
    nlohmann::json j;
    j["variant"] = to_string(variant);
    j["tau"] = tau;
    j["n"] = n;
    j["lag"] = lag;
    j["noise_std_ay"] = noise_std_ay;
    j["noise_std_z"] = noise_std_z;
    j["omega"] = {omega[0], omega[1], omega[2]};
    j["coefficient_rule"] = to_string(coefficient_rule);
    j["seed"] = seed;
    j["n_val"] = n_val;
    j["n_test"] = n_test;
    j["outcome_ignores_treatment"] = outcome_ignores_treatment;
    return j.dump();
}

std::vector<const Trajectory*> Dataset::select(Split split) const {
    std::vector<const Trajectory*> out;
    for (const auto& tr : trajectories)
        if (tr.split == split) out.push_back(&tr);
    return out;
}

Dataset Dataset::subset(Split split) const {
    Dataset out = *this;
    out.trajectories.clear();
    for (const auto& tr : trajectories)
        if (tr.split == split) out.trajectories.push_back(tr);
    return out;
}

void Dataset::validate() const {
    if (tau < 1 || d < 1) throw ContractError("dataset: tau and d must be positive");
    if (!(y_min < y_max)) throw ContractError("dataset: y_min must be below y_max");
    for (const auto& tr : trajectories) {
        if (tr.covariates.size() != tau || tr.actions.size() != tau)
            throw ContractError("dataset: unit " + std::to_string(tr.id) + " has the wrong horizon");
        for (const auto& row : tr.covariates)
            if (row.size() != d)
                throw ContractError("dataset: unit " + std::to_string(tr.id) + " has the wrong width");
        for (int a : tr.actions)
            if (a != 0 && a != 1)
                throw ContractError("dataset: unit " + std::to_string(tr.id) + " has a non-binary action");
    }
}

std::vector<double> lag_coefficients(std::size_t lag, CoefficientRule rule) {
    std::vector<double> c(lag, 0.0);
    for (std::size_t i = 1; i <= lag; ++i) {
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        const double di = static_cast<double>(i);
        if (rule == CoefficientRule::shifted) c[i - 1] = sign / (1.0 + di);
        else if (i >= 2) c[i - 1] = sign / (1.0 - di);
    }
    return c;
}

Dataset simulate(const DgpConfig& config) {
    config.validate();
    const auto coeffs = lag_coefficients(config.lag, config.coefficient_rule);
    Dataset ds;
    ds.tau = config.tau;
    ds.d = config.covariate_dim();
    ds.seed = config.seed;
    ds.variant = to_string(config.variant);

    const std::size_t n_train = config.n - config.n_val - config.n_test;
    std::vector<double> raw(config.n);
    ds.trajectories.resize(config.n);
    for (std::size_t u = 0; u < config.n; ++u) {
        auto rng = detail::unit_stream(config.seed, u, detail::StreamTag::dataset);
        auto draw = detail::simulate_unit(config, coeffs, rng, nullptr);
        auto& tr = ds.trajectories[u];
        tr.id = u;
        tr.split = u < n_train ? Split::train : u < n_train + config.n_val ? Split::val : Split::test;
        tr.covariates = std::move(draw.covariates);
        tr.actions = std::move(draw.actions);
        raw[u] = draw.outcome;
    }

    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.begin() + static_cast<long>(n_train));
    ds.y_min = *lo;
    ds.y_max = *hi;
    if (!(ds.y_min < ds.y_max)) {
        // A single training unit: widen symmetrically so scaling stays defined.
        ds.y_min -= 0.5;
        ds.y_max += 0.5;
    }
    for (std::size_t u = 0; u < config.n; ++u) {
        const double s = ds.scale(raw[u]);
        ds.trajectories[u].outcome = u < n_train ? s : std::clamp(s, 0.0, 1.0);
    }
    return ds;
}

PositivityReport positivity_report(const DgpConfig& config, double lo, double hi) {
    config.validate();
    const auto coeffs = lag_coefficients(config.lag, config.coefficient_rule);
    PositivityReport rep;
    for (std::size_t u = 0; u < config.n; ++u) {
        auto rng = detail::unit_stream(config.seed, u, detail::StreamTag::dataset);
        const auto draw = detail::simulate_unit(config, coeffs, rng, nullptr);
        for (double p : draw.propensity) {
            ++rep.pairs;
            if (p > lo && p < hi) ++rep.inside;
            rep.min_propensity = std::min(rep.min_propensity, p);
            rep.max_propensity = std::max(rep.max_propensity, p);
        }
    }
    return rep;
}

} // namespace longdr::synth
