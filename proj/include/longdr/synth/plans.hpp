#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace longdr::synth {

// History-dependent decision rule. Rules see L_{1:t} and A_{1:t-1}.
struct PolicyRule {
    enum class Kind { threshold, constant };
    Kind kind = Kind::constant;
    std::size_t dim = 0;   // threshold: covariate column of L_t
    double threshold = 0.0; // threshold: treat iff L_t[dim] > threshold
    int value = 1;         // constant: the action

    int operator()(const std::vector<std::vector<double>>& covariates, const std::vector<int>& actions,
                   std::size_t t) const;
    std::string describe() const;
};

struct TreatmentPlan {
    enum class Kind { fixed, policy };
    std::string id;
    Kind kind = Kind::fixed;
    std::vector<int> sequence;
    PolicyRule rule;

    static TreatmentPlan fixed(std::string id, std::vector<int> sequence);
    static TreatmentPlan policy(std::string id, PolicyRule rule);

    // Action at 0-based step t given the history up to L_t.
    int action(const std::vector<std::vector<double>>& covariates, const std::vector<int>& actions,
               std::size_t t) const;
    void validate(std::size_t tau) const;
    std::string canonical() const;
};

enum class Cf4Reading { six_to_tau, literal };

// CF1 never, CF2 always, CF3 first part treated, CF4 second part treated.
std::vector<TreatmentPlan> standard_plans(std::size_t tau, Cf4Reading cf4 = Cf4Reading::six_to_tau);

// Looks up CF1..CF4, "always"/"never", or "threshold:<dim>:<value>".
TreatmentPlan plan_by_id(const std::string& id, std::size_t tau,
                         Cf4Reading cf4 = Cf4Reading::six_to_tau);

} // namespace longdr::synth
