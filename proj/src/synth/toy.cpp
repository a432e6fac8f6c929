#include "longdr/synth/toy.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "longdr/common/errors.hpp"
#include "longdr/common/numeric.hpp"
#include "simulator.hpp"

namespace longdr::synth {

namespace {

double q2(const ToyParams& p, double l1, double l2, int a1, int a2) {
    return expit(p.c[0] + p.c[1] * l1 + p.c[2] * l2 + p.c[3] * a1 + p.c[4] * a2);
}

// E[f(mu + Z)], Z ~ N(0,1). Trapezoid on a wide grid is spectrally accurate
// for these smooth, Gaussian-damped integrands.
template <class F>
double normal_expectation(double mu, F&& f) {
    constexpr int kHalf = 200;
    constexpr double kStep = 0.05;
    const double norm = kStep / std::sqrt(2.0 * std::numbers::pi);
    double s = 0.0;
    for (int k = -kHalf; k <= kHalf; ++k) {
        const double z = k * kStep;
        s += std::exp(-0.5 * z * z) * f(mu + z);
    }
    return s * norm;
}

double q1(const ToyParams& p, const std::array<int, 2>& plan, double l1, int a1) {
    return normal_expectation(p.g[0] * l1 + p.g[1] * a1,
                              [&](double l2) { return q2(p, l1, l2, a1, plan[1]); });
}

} // namespace

Dataset simulate_toy(const ToyParams& p, std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.tau = 2;
    ds.d = 1;
    ds.y_min = 0.0;
    ds.y_max = 1.0;
    ds.seed = seed;
    ds.variant = "toy";
    ds.trajectories.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        auto rng = detail::unit_stream(seed, u, detail::StreamTag::dataset);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double l1 = nd(rng);
        const int a1 = unif(rng) < expit(p.a[0] + p.a[1] * l1) ? 1 : 0;
        const double l2 = p.g[0] * l1 + p.g[1] * a1 + nd(rng);
        const int a2 = unif(rng) < expit(p.b[0] + p.b[1] * l2 + p.b[2] * a1) ? 1 : 0;
        const double y = unif(rng) < q2(p, l1, l2, a1, a2) ? 1.0 : 0.0;
        auto& tr = ds.trajectories[u];
        tr.id = u;
        tr.covariates = {{l1}, {l2}};
        tr.actions = {a1, a2};
        tr.outcome = y;
    }
    return ds;
}

double toy_propensity(const ToyParams& p, const Trajectory& tr, std::size_t t) {
    if (t == 0) return expit(p.a[0] + p.a[1] * tr.covariates[0][0]);
    if (t == 1) return expit(p.b[0] + p.b[1] * tr.covariates[1][0] + p.b[2] * tr.actions[0]);
    throw ContractError("toy process has two steps");
}

double toy_q(const ToyParams& p, const std::array<int, 2>& plan, const Trajectory& tr, std::size_t t,
             int action) {
    const double l1 = tr.covariates[0][0];
    if (t == 0) return q1(p, plan, l1, action);
    if (t == 1) return q2(p, l1, tr.covariates[1][0], tr.actions[0], action);
    throw ContractError("toy process has two steps");
}

double toy_truth(const ToyParams& p, const std::array<int, 2>& plan) {
    return normal_expectation(0.0, [&](double l1) { return q1(p, plan, l1, plan[0]); });
}

} // namespace longdr::synth
