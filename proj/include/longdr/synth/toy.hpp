#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "longdr/synth/dgp.hpp"

namespace longdr::synth {

// Two-step process with known nuisances:
//   L1 ~ N(0,1),               A1 ~ Bern(expit(a0 + a1 L1))
//   L2 = g1 L1 + g2 A1 + N(0,1), A2 ~ Bern(expit(b0 + b1 L2 + b2 A1))
//   Y ~ Bern(expit(c0 + c1 L1 + c2 L2 + c3 A1 + c4 A2))
struct ToyParams {
    std::array<double, 2> a{0.2, 0.8};
    std::array<double, 2> g{0.5, 0.6};
    std::array<double, 3> b{-0.2, 0.7, 0.5};
    std::array<double, 5> c{-0.3, 0.4, 0.6, 0.5, 0.8};
};

// tau = 2, d = 1, outcomes already in {0, 1}; every unit is tagged train.
Dataset simulate_toy(const ToyParams& p, std::size_t n, std::uint64_t seed);

// P(A_t = 1 | H_t) for 0-based t.
double toy_propensity(const ToyParams& p, const Trajectory& tr, std::size_t t);

// Q_t(action, H_t) under the fixed plan (a1, a2). Q_1 integrates L2 out by
// quadrature, Q_2 is closed form.
double toy_q(const ToyParams& p, const std::array<int, 2>& plan, const Trajectory& tr, std::size_t t,
             int action);

// E[Y(a1, a2)] by nested quadrature.
double toy_truth(const ToyParams& p, const std::array<int, 2>& plan);

} // namespace longdr::synth
