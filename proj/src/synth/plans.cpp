#include "longdr/synth/plans.hpp"

#include <cstdio>

#include "longdr/common/errors.hpp"

namespace longdr::synth {

int PolicyRule::operator()(const std::vector<std::vector<double>>& covariates, const std::vector<int>&,
                           std::size_t t) const {
    if (kind == Kind::constant) return value;
    if (t >= covariates.size() || dim >= covariates[t].size())
        throw ContractError("threshold rule reads outside the observed history");
    return covariates[t][dim] > threshold ? 1 : 0;
}

std::string PolicyRule::describe() const {
    if (kind == Kind::constant) return "constant:" + std::to_string(value);
    char buf[64];
    std::snprintf(buf, sizeof buf, "threshold:%zu:%.17g", dim, threshold);
    return buf;
}

TreatmentPlan TreatmentPlan::fixed(std::string id, std::vector<int> sequence) {
    TreatmentPlan p;
    p.id = std::move(id);
    p.kind = Kind::fixed;
    p.sequence = std::move(sequence);
    return p;
}

TreatmentPlan TreatmentPlan::policy(std::string id, PolicyRule rule) {
    TreatmentPlan p;
    p.id = std::move(id);
    p.kind = Kind::policy;
    p.rule = rule;
    return p;
}

int TreatmentPlan::action(const std::vector<std::vector<double>>& covariates,
                          const std::vector<int>& actions, std::size_t t) const {
    if (kind == Kind::fixed) {
        if (t >= sequence.size()) throw ContractError("plan '" + id + "' is shorter than the horizon");
        return sequence[t];
    }
    return rule(covariates, actions, t);
}

void TreatmentPlan::validate(std::size_t tau) const {
    if (kind == Kind::fixed) {
        if (sequence.size() != tau)
            throw ContractError("plan '" + id + "' has length " + std::to_string(sequence.size()) +
                                " but the horizon is " + std::to_string(tau));
        for (int a : sequence)
            if (a != 0 && a != 1) throw ContractError("plan '" + id + "' has a non-binary action");
        return;
    }
    if (rule.kind == PolicyRule::Kind::constant && rule.value != 0 && rule.value != 1)
        throw ContractError("plan '" + id + "' has a non-binary constant");
}

std::string TreatmentPlan::canonical() const {
    if (kind == Kind::policy) return "policy:" + rule.describe();
    std::string s = "fixed:";
    for (int a : sequence) s += static_cast<char>('0' + a);
    return s;
}

namespace {

// Treated on [first, last] (1-based, inclusive), untreated elsewhere.
std::vector<int> window(std::size_t tau, std::size_t first, std::size_t last) {
    std::vector<int> a(tau, 0);
    for (std::size_t t = first; t <= last && t <= tau; ++t) a[t - 1] = 1;
    return a;
}

} // namespace

std::vector<TreatmentPlan> standard_plans(std::size_t tau, Cf4Reading cf4) {
    if (tau < 1) throw ContractError("standard_plans: horizon must be positive");
    // Last step of the treated opening block (CF3) and last untreated step (CF4).
    std::size_t cf3_end = (tau + 1) / 2, cf4_zero_end = (tau + 1) / 2;
    switch (tau) {
    case 3: cf3_end = 2; cf4_zero_end = 1; break;
    case 5: cf3_end = 3; cf4_zero_end = 2; break;
    case 10: cf3_end = 5; cf4_zero_end = 5; break;
    case 15: cf3_end = 10; cf4_zero_end = cf4 == Cf4Reading::literal ? 10 : 5; break;
    case 20: cf3_end = 10; cf4_zero_end = 10; break;
    default: break;
    }
    return {TreatmentPlan::fixed("CF1", std::vector<int>(tau, 0)),
            TreatmentPlan::fixed("CF2", std::vector<int>(tau, 1)),
            TreatmentPlan::fixed("CF3", window(tau, 1, cf3_end)),
            TreatmentPlan::fixed("CF4", window(tau, cf4_zero_end + 1, tau))};
}

TreatmentPlan plan_by_id(const std::string& id, std::size_t tau, Cf4Reading cf4) {
    for (auto& p : standard_plans(tau, cf4))
        if (p.id == id) return p;
    if (id == "always") return TreatmentPlan::policy(id, {PolicyRule::Kind::constant, 0, 0.0, 1});
    if (id == "never") return TreatmentPlan::policy(id, {PolicyRule::Kind::constant, 0, 0.0, 0});
    std::size_t dim = 0;
    double thr = 0.0;
    if (std::sscanf(id.c_str(), "threshold:%zu:%lf", &dim, &thr) == 2)
        return TreatmentPlan::policy(id, {PolicyRule::Kind::threshold, dim, thr, 1});
    throw ConfigError("unknown plan '" + id + "'");
}

} // namespace longdr::synth
