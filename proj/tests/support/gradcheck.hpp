#pragma once

// Central finite-difference gradient checker shared by the unit and
// acceptance suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "longdr/autodiff/ops.hpp"
#include "longdr/autodiff/tape.hpp"

namespace longdr::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t points = 0;  // number of scalar coordinates compared
};

// Builds a scalar loss from the given leaves.
using LossBuilder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

inline GradCheckResult gradcheck(const LossBuilder& build, std::vector<ad::Tensor> inputs,
                                 double step = 1e-5) {
    auto evaluate = [&](const std::vector<ad::Tensor>& xs) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (const auto& x : xs) leaves.push_back(tape.constant(x));
        return build(tape, leaves).value().item();
    };

    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (auto x : inputs) leaves.push_back(tape.leaf(x.set_requires_grad(true)));
    const auto grads = tape.backward(build(tape, leaves));

    GradCheckResult result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const ad::Tensor& g = grads.of(leaves[i]);
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            auto plus = inputs;
            auto minus = inputs;
            plus[i][j] += step;
            minus[i][j] -= step;
            const double numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * step);
            result.max_rel_error = std::max(result.max_rel_error, relative_error(g[j], numeric));
            ++result.points;
        }
    }
    return result;
}

} // namespace longdr::testing
