#pragma once

#include <cstddef>
#include <vector>

namespace longdr::model {

// Per-unit, per-step nuisance values, row-major [unit][t]. s is [unit][t][d]
// in standardised covariate units.
struct NuisanceEval {
    std::size_t n = 0;
    std::size_t tau = 0;
    std::size_t d = 0;
    std::vector<double> q_obs;   // Q_t(A_t, H_t)
    std::vector<double> q_cf;    // Q_t(a_t, H_t)
    std::vector<double> g;       // G_t(H_t) = P(A_t = 1 | H_t)
    std::vector<double> s;       // S_t(A_t, H_t)
    std::vector<int> factual;    // A_t
    std::vector<int> planned;    // a_t (or pi_t(h_t))

    NuisanceEval() = default;
    NuisanceEval(std::size_t n_, std::size_t tau_, std::size_t d_ = 0)
        : n(n_), tau(tau_), d(d_), q_obs(n_ * tau_), q_cf(n_ * tau_), g(n_ * tau_),
          s(n_ * tau_ * d_), factual(n_ * tau_), planned(n_ * tau_) {}

    std::size_t idx(std::size_t unit, std::size_t t) const { return unit * tau + t; }
};

} // namespace longdr::model
