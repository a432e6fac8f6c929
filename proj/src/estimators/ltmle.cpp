#include <cmath>
#include <limits>

#include "longdr/common/numeric.hpp"
#include "longdr/estimators/estimators.hpp"

namespace longdr::est {

namespace {

constexpr double kBound = 10.0;
constexpr std::size_t kMaxIter = 200;

double clamped_logit(double q) { return logit(clamp_probability(q)); }

struct Problem {
    const std::vector<double>& w;
    const std::vector<double>& base; // logit of the initial Q_t(A_t)
    const std::vector<double>& y;
    double inv_n;

    // Derivative of the smooth part and its second derivative at eps.
    void derivs(double eps, double& g, double& h) const {
        g = 0.0;
        h = 0.0;
        for (std::size_t u = 0; u < w.size(); ++u) {
            if (w[u] == 0.0) continue;
            const double p = expit(base[u] + eps);
            g += w[u] * (p - y[u]);
            h += w[u] * p * (1.0 - p);
        }
        g *= inv_n;
        h *= inv_n;
    }
};

// Minimiser of smooth(eps) + lambda |eps| on [-10, 10]. The smooth part is
// convex, so the subgradient condition picks the side and a bracketed Newton
// iteration finds the root of g(eps) +- lambda.
double solve_epsilon(const Problem& pb, double lambda, double weight_mass, std::size_t& iterations) {
    iterations = 0;
    if (weight_mass == 0.0) return 0.0;
    double g0, h0;
    pb.derivs(0.0, g0, h0);
    if (std::abs(g0) <= lambda) return 0.0;
    const double shift = g0 > lambda ? -lambda : lambda;
    double lo = g0 > lambda ? -kBound : 0.0;
    double hi = g0 > lambda ? 0.0 : kBound;
    {
        double gb, hb;
        const double edge = g0 > lambda ? lo : hi;
        pb.derivs(edge, gb, hb);
        const double at_edge = gb + shift;
        // No sign change inside the interval: the constrained optimum is the edge.
        if ((g0 > lambda && at_edge >= 0.0) || (g0 < -lambda && at_edge <= 0.0)) return edge;
    }
    const double tol = 1e-15 * std::max(1.0, weight_mass * pb.inv_n);
    double eps = 0.0;
    while (iterations < kMaxIter) {
        ++iterations;
        double g, h;
        pb.derivs(eps, g, h);
        const double f = g + shift;
        if (std::abs(f) <= tol) return eps;
        if (f > 0.0) hi = eps;
        else lo = eps;
        double next = h > 0.0 ? eps - f / h : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eps))) return next;
        eps = next;
    }
    throw EstimatorError("fluctuation did not converge within 200 iterations");
}

} // namespace

Fluctuation ltmle_fluctuate(const NuisanceEval& ev, const WeightTable& weights, const std::vector<double>& outcomes,
                            double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (outcomes.size() != ev.n) throw ContractError("one outcome per unit required");
    if (weights.n != ev.n || weights.tau != ev.tau) throw ContractError("weights and evaluations are not aligned");
    const std::size_t n = ev.n, tau = ev.tau;
    Fluctuation fl;
    fl.epsilon.assign(tau, 0.0);
    fl.iterations.assign(tau, 0);
    fl.targeted = ev;

    std::vector<double> w(n), base(n), y(outcomes);
    const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
    for (std::size_t t = tau; t-- > 0;) {
        double mass = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            const std::size_t r = ev.idx(u, t);
            w[u] = weights.cum[r];
            mass += w[u];
            base[u] = clamped_logit(ev.q_obs[r]);
            if (t + 1 < tau) y[u] = fl.targeted.q_cf[r + 1];
        }
        const Problem pb{w, base, y, inv_n};
        const double eps = solve_epsilon(pb, lambda, mass, fl.iterations[t]);
        fl.epsilon[t] = eps;
        if (eps == 0.0) continue; // leave the step exactly as fitted
        for (std::size_t u = 0; u < n; ++u) {
            const std::size_t r = ev.idx(u, t);
            fl.targeted.q_obs[r] = expit(base[u] + eps);
            fl.targeted.q_cf[r] = expit(clamped_logit(ev.q_cf[r]) + eps);
        }
    }
    fl.q1.resize(n);
    for (std::size_t u = 0; u < n; ++u) fl.q1[u] = fl.targeted.q_cf[ev.idx(u, 0)];
    return fl;
}

std::vector<double> ltmle_scores(const Fluctuation& fl, const WeightTable& weights,
                                 const std::vector<double>& outcomes) {
    const auto& ev = fl.targeted;
    std::vector<double> scores(ev.tau, 0.0);
    for (std::size_t t = 0; t < ev.tau; ++t) {
        for (std::size_t u = 0; u < ev.n; ++u) {
            const std::size_t r = ev.idx(u, t);
            const double target = t + 1 == ev.tau ? outcomes[u] : ev.q_cf[r + 1];
            scores[t] += weights.cum[r] * (ev.q_obs[r] - target);
        }
    }
    return scores;
}

} // namespace longdr::est
