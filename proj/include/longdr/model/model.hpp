#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "longdr/autodiff/ops.hpp"
#include "longdr/autodiff/optimizer.hpp"
#include "longdr/model/nuisance_eval.hpp"
#include "longdr/synth/dgp.hpp"

namespace longdr::model {

struct ModelConfig {
    std::size_t hidden = 16;
    std::size_t layers = 1;
    std::size_t heads = 2;
    double dropout = 0.0;
    std::size_t covariate_dim = 11;
    std::size_t tau = 10;
    double alpha = 1.0;        // weight of the auxiliary G/S losses
    double target_rate = 0.02; // Polyak beta
    std::size_t ff_multiplier = 2;
    std::size_t horizon_heads = 1; // M: G/S heads predict M steps ahead
    bool zero_heads = false;       // heads start at zero: Q = G = 0.5 and S = 0 everywhere

    void validate() const;
};

// Column-wise affine standardisation fitted on training covariates.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const std::vector<const synth::Trajectory*>& units, std::size_t d);
    static Standardizer identity(std::size_t d);
    double apply(std::size_t j, double x) const { return (x - mean[j]) / scale[j]; }
};

// Inputs of one forward pass: standardised covariates [n*tau, d] and the
// factual actions [n*tau, 1], row (unit * tau + t).
struct Batch {
    std::size_t n = 0;
    std::size_t tau = 0;
    std::size_t d = 0;
    ad::Tensor covariates;
    ad::Tensor actions;
    std::vector<int> factual;
};

Batch make_batch(const std::vector<const synth::Trajectory*>& units, const Standardizer& st);

// Graph handles from a recorded forward pass. Rows are (unit * tau + t).
struct TapedForward {
    std::vector<ad::Var> params; // aligned with NuisanceModel::params
    ad::Var covariates;          // input leaves (grad only when requested)
    ad::Var actions;
    ad::Var q_logit;             // [n*tau, 1], read at A_t tokens
    ad::Var g_logit;             // [n*tau, M], read at L_t tokens
    ad::Var s;                   // [n*tau, M*d], read at A_t tokens
};

struct ForwardOptions {
    std::mt19937_64* dropout_rng = nullptr; // dropout only when set
    bool params_require_grad = true;
    bool inputs_require_grad = false;
};

class NuisanceModel {
public:
    NuisanceModel() = default;
    // Fan-in scaled uniform weights, zero biases, unit layer-norm gains.
    static NuisanceModel init(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ad::ParameterSet& params() { return params_; }
    const ad::ParameterSet& params() const { return params_; }
    Standardizer& standardizer() { return standardizer_; }
    const Standardizer& standardizer() const { return standardizer_; }

    TapedForward forward(ad::Tape& tape, const Batch& batch, const ForwardOptions& opts = {}) const;

    // Gradient-free evaluation. planned[unit * tau + t] is the substituted
    // action for q_cf; every other token stays factual.
    NuisanceEval evaluate(const Batch& batch, const std::vector<int>& planned) const;

    std::size_t parameter_count() const;
    bool operator==(const NuisanceModel& other) const;

private:
    TapedForward run(ad::Tape& tape, const Batch& batch, const ForwardOptions& opts,
                     std::vector<ad::Var>* keys, std::vector<ad::Var>* values) const;

    ModelConfig config_;
    ad::ParameterSet params_;
    Standardizer standardizer_;
};

// theta' <- beta * theta + (1 - beta) * theta', evaluated as
// theta' + beta * (theta - theta') so a target equal to the live model stays
// bit-identical. beta = 1 copies exactly, beta = 0 leaves the target untouched.
void polyak_update(const NuisanceModel& live, NuisanceModel& target, double beta);

void save_checkpoint(const std::string& path, const NuisanceModel& model);
NuisanceModel load_checkpoint(const std::string& path);

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

} // namespace longdr::model
