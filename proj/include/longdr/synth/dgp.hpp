#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace longdr::synth {

enum class Variant { limited, expanded };
enum class CoefficientRule { shifted, paper_singular };
enum class Split { train, val, test };

Variant parse_variant(const std::string& s);
CoefficientRule parse_coefficient_rule(const std::string& s);
Split parse_split(const std::string& s);
std::string to_string(Variant v);
std::string to_string(CoefficientRule r);
std::string to_string(Split s);

inline constexpr std::size_t kBaseDim = 10;
inline constexpr std::size_t kLatentDim = 5;
// Treatment-policy noise is read as "tanh(Y)/2" inside the policy sum.
inline constexpr const char* kParenthesisReading = "tanh(Y)/2";

struct DgpConfig {
    Variant variant = Variant::limited;
    std::size_t tau = 10;
    std::size_t n = 1500;
    std::size_t lag = 8;
    double noise_std_ay = 0.5;
    double noise_std_z = 0.3;
    double omega[3] = {0.37, 0.42, 0.29};
    CoefficientRule coefficient_rule = CoefficientRule::shifted;
    std::uint64_t seed = 0;
    // Units [0, n - n_val - n_test) are train, then val, then test.
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    // Debug knob: the outcome equation sees A = 1 regardless of treatment.
    bool outcome_ignores_treatment = false;

    void validate() const;
    // Covariate width of L_t: base (+ latent) covariates plus Y_{t-1}.
    std::size_t covariate_dim() const;
    std::string canonical() const;
};

struct Trajectory {
    std::size_t id = 0;
    Split split = Split::train;
    std::vector<std::vector<double>> covariates; // tau rows of width d
    std::vector<int> actions;
    double outcome = 0.0; // scaled with the train extremes

    bool operator==(const Trajectory&) const = default;
};

struct Dataset {
    std::size_t tau = 0;
    std::size_t d = 0;
    double y_min = 0.0;
    double y_max = 1.0;
    std::uint64_t seed = 0;
    std::string variant = "limited";
    std::vector<Trajectory> trajectories;

    double unscale(double scaled) const { return y_min + (y_max - y_min) * scaled; }
    double scale(double raw) const { return (raw - y_min) / (y_max - y_min); }
    std::vector<const Trajectory*> select(Split split) const;
    // Copy holding only units of one split (header unchanged).
    Dataset subset(Split split) const;
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

// Lag coefficients c_1..c_h under the configured repair of the singular sum.
std::vector<double> lag_coefficients(std::size_t lag, CoefficientRule rule);

Dataset simulate(const DgpConfig& config);

// Intensity before the first step, l_0 = tau/2 - 3.
double initial_intensity(std::size_t tau);

// Z_{t+1} from Z_t, A_t, the mean of the base covariates and the noise draw.
std::vector<double> latent_step(const DgpConfig& config, const std::vector<double>& z, int action,
                                double base_mean, const std::vector<double>& noise);

// Fraction of (unit, t) pairs whose true propensity lies inside (lo, hi).
struct PositivityReport {
    std::size_t pairs = 0;
    std::size_t inside = 0;
    double min_propensity = 1.0;
    double max_propensity = 0.0;
    double fraction_inside() const {
        return pairs == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(pairs);
    }
};

PositivityReport positivity_report(const DgpConfig& config, double lo = 0.01, double hi = 0.99);

} // namespace longdr::synth
