#include "simulator.hpp"

#include <cmath>

#include "longdr/common/numeric.hpp"

namespace longdr::synth {

double initial_intensity(std::size_t tau) { return static_cast<double>(tau) / 2.0 - 3.0; }

std::vector<double> latent_step(const DgpConfig& config, const std::vector<double>& z, int action,
                                double base_mean, const std::vector<double>& noise) {
    std::vector<double> next(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        next[j] = config.omega[0] * z[j] + config.omega[1] * action * expit(z[j] * z[j]) +
                  config.omega[2] * 0.25 * std::tanh(base_mean) + noise[j];
    }
    return next;
}

} // namespace longdr::synth

namespace longdr::synth::detail {

std::mt19937_64 unit_stream(std::uint64_t seed, std::uint64_t unit, StreamTag tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(unit), static_cast<std::uint32_t>(unit >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

namespace {

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t j = begin; j < end; ++j) s += v[j];
    return s / static_cast<double>(end - begin);
}

} // namespace

UnitDraw simulate_unit(const DgpConfig& config, const std::vector<double>& coeffs,
                       std::mt19937_64& rng, const TreatmentPlan* plan) {
    const std::size_t tau = config.tau;
    const bool expanded = config.variant == Variant::expanded;
    const std::size_t width = kBaseDim + (expanded ? kLatentDim : 0);
    std::normal_distribution<double> std_normal(0.0, 1.0);

    // state[t] = (X_t, Z_t) for 0-based t; y[t] is the outcome realised after A_t.
    std::vector<std::vector<double>> state(tau, std::vector<double>(width));
    std::vector<double> xbar(tau), grp1(tau), grp2(tau), y(tau);
    UnitDraw out;
    out.covariates.assign(tau, std::vector<double>(width + 1));
    out.actions.assign(tau, 0);
    out.propensity.assign(tau, 0.0);

    for (std::size_t j = 0; j < kBaseDim; ++j) state[0][j] = std_normal(rng);
    if (expanded)
        for (std::size_t j = 0; j < kLatentDim; ++j) state[0][kBaseDim + j] = std_normal(rng);

    double intensity = initial_intensity(tau);
    const double half_tau = static_cast<double>(tau) / 2.0;

    for (std::size_t t = 0; t < tau; ++t) {
        const auto& s = state[t];
        xbar[t] = mean_of(s, 0, width);
        grp1[t] = mean_of(s, 0, 5);
        grp2[t] = mean_of(s, 5, width);

        auto& row = out.covariates[t];
        std::copy(s.begin(), s.end(), row.begin());
        row[width] = t == 0 ? 0.0 : y[t - 1];

        // Lag i (1-based) looks at step t + 1 - i; steps before the first are zero.
        double score = 0.0;
        for (std::size_t i = 1; i <= coeffs.size() && i <= t + 1; ++i) {
            const std::size_t k = t + 1 - i;
            const double y_prev = k == 0 ? 0.0 : y[k - 1];
            score += coeffs[i - 1] * (xbar[k] + std::tanh(y_prev) / 2.0);
        }
        score -= std::tanh(intensity - half_tau);

        const double eps_a = config.noise_std_ay * std_normal(rng);
        const double eps_y = config.noise_std_ay * std_normal(rng);
        // sigma(score + eps) > 0.5 iff score + eps > 0.
        out.propensity[t] = 0.5 * std::erfc(-score / (config.noise_std_ay * std::sqrt(2.0)));
        const int natural = score + eps_a > 0.0 ? 1 : 0;
        out.actions[t] = plan ? plan->action(out.covariates, out.actions, t) : natural;

        double signal = 0.0;
        for (std::size_t i = 1; i <= coeffs.size() && i <= t + 1; ++i) {
            const std::size_t k = t + 1 - i;
            const double a = config.outcome_ignores_treatment ? 1.0 : out.actions[k];
            signal += coeffs[i - 1] * std::tanh(std::sin(grp1[k] * a) + std::cos(grp2[k] * a));
        }
        y[t] = 5.0 * signal + eps_y;
        intensity += 2.0 * (out.actions[t] - 1) * xbar[t] * std::tanh(y[t]);

        if (t + 1 == tau) break;
        auto& next = state[t + 1];
        for (std::size_t j = 0; j < kBaseDim; ++j) next[j] = 0.8 * s[j] + 0.6 * std_normal(rng);
        if (expanded) {
            const std::vector<double> z(s.begin() + kBaseDim, s.end());
            std::vector<double> noise(kLatentDim);
            for (auto& e : noise) e = config.noise_std_z * std_normal(rng);
            const auto z_next = latent_step(config, z, out.actions[t], mean_of(s, 0, kBaseDim), noise);
            std::copy(z_next.begin(), z_next.end(), next.begin() + kBaseDim);
        }
    }
    out.outcome = y[tau - 1];
    return out;
}

} // namespace longdr::synth::detail
