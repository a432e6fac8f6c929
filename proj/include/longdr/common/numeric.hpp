#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace longdr {

inline double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double clamp_probability(double p, double eps = 1e-7) {
    return std::clamp(p, eps, 1.0 - eps);
}

inline double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

// Pairwise (cascade) summation. The result depends only on the order of the
// input, never on how callers chunk or parallelise the producer loop.
inline double pairwise_sum(std::span<const double> xs) {
    constexpr std::size_t kLeaf = 16;
    if (xs.size() <= kLeaf) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Linear-interpolated quantile (type 7), q in [0, 1]. Takes a copy.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

} // namespace longdr
