#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "longdr/autodiff/optimizer.hpp"
#include "longdr/common/errors.hpp"
#include "longdr/model/model.hpp"
#include "longdr/synth/dgp.hpp"
#include "longdr/synth/plans.hpp"

namespace longdr::est {

using model::NuisanceEval;

// Per-step inverse propensity weights and their running products, row-major
// [unit][t]. cum[t] = w_1 * ... * w_t.
struct WeightTable {
    std::size_t n = 0;
    std::size_t tau = 0;
    std::vector<double> w;
    std::vector<double> cum;
    std::size_t truncated = 0; // propensities moved onto [g_min, 1 - g_min]
};

// 1(A = a) / (a G + (1 - a)(1 - G)) with G truncated first.
double step_weight(int planned, int factual, double g, double g_min);
WeightTable compute_weights(const NuisanceEval& ev, double g_min);

enum class TargetKind { ice, sdr };

// (tau + 1) entries per unit: entry k is Q†_{k+1}, so entry 0 feeds the final
// estimate, entry t + 1 is the regression target of Q_t (0-based t), and
// entry tau is the outcome.
struct PseudoOutcomeTable {
    std::size_t n = 0;
    std::size_t tau = 0;
    TargetKind kind = TargetKind::ice;
    std::vector<double> value;     // possibly clipped
    std::vector<double> unclipped;
    std::vector<unsigned char> clipped;

    double entry(std::size_t unit, std::size_t k) const { return value[unit * (tau + 1) + k]; }
    double target_for(std::size_t unit, std::size_t t) const { return entry(unit, t + 1); }
    double clip_rate() const;
};

PseudoOutcomeTable ice_targets(const NuisanceEval& ev, const std::vector<double>& outcomes);

// Q†_t = q_cf_t + sum_{s>=t} (prod_{k=t}^s w_k) [Q_{s+1}(a) - Q_s(A)], Q_{tau+1} = Y,
// evaluated by the equivalent backward recursion Q†_t = q_cf_t + w_t (Q†_{t+1} - q_obs_t).
// Clipping, when requested, is applied to each stored entry after the exact
// recursion.
PseudoOutcomeTable sdr_targets(const NuisanceEval& ev, const WeightTable& weights,
                               const std::vector<double>& outcomes, bool clip);

// D*(O) = sum_s W_{1:s} [Q_{s+1}(a) - Q_s(A)], Q_{tau+1} = Y.
std::vector<double> influence_function(const NuisanceEval& ev, const WeightTable& weights,
                                       const std::vector<double>& outcomes);

// Actions the plan prescribes along the factual history of one unit.
std::vector<int> policy_actions(const synth::TreatmentPlan& plan, const synth::Trajectory& tr);

// Loss inputs for one batch, rows (unit * tau + t).
struct LossInputs {
    std::size_t n = 0;
    std::size_t tau = 0;
    std::size_t d = 0;
    std::size_t horizon_heads = 1;
    std::vector<double> targets;        // regression target of Q_t
    std::vector<int> factual;           // A_t
    std::vector<double> covariates;     // standardised L_t, [n*tau*d]
};

struct LossVars {
    ad::Var total, q, g, s;
};

// L = L_Q + alpha (L_G + L_S) with
//   L_Q = sum_t mean_u (Q_t - target_t)^2
//   L_G = sum_t mean_u BCE(G_t, A_t)            (plus m-step-ahead heads)
//   L_S = sum_{t<tau} mean_u mean_j (S_t - L_{t+1})^2
// L_S is zero when use_simulator is false. q_prob is [n*tau, 1].
LossVars training_losses(ad::Var q_prob, ad::Var g_logit, ad::Var s, const LossInputs& in, double alpha,
                         bool use_simulator);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch = 128;
    double learning_rate = 1e-3;
    ad::OptimizerKind optimizer = ad::OptimizerKind::adam;
    bool use_sdr = true;
    bool use_simulator = true;
    bool clip = true;
    double g_min = 0.01;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    double loss = 0.0;
    double loss_q = 0.0;
    double loss_g = 0.0;
    double loss_s = 0.0;
    double clip_rate = 0.0;
    std::vector<double> xi; // RMS of Q_t(A_t, H_t) - target_t over the epoch
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

// Carries the trace so far and the last live model (never updated by the
// failing step, since the optimiser rejects non-finite gradients).
class TrainingDiverged : public TrainingError {
public:
    TrainingDiverged(const std::string& what, TrainTrace trace,
                     std::shared_ptr<const model::NuisanceModel> last = nullptr)
        : TrainingError(what), trace_(std::move(trace)), last_(std::move(last)) {}
    const TrainTrace& trace() const { return trace_; }
    const std::shared_ptr<const model::NuisanceModel>& last_model() const { return last_; }

private:
    TrainTrace trace_;
    std::shared_ptr<const model::NuisanceModel> last_;
};

struct TrainResult {
    model::NuisanceModel live;
    model::NuisanceModel target;
    TrainTrace trace;
};

// Live forward, target-network targets (SDR or ICE), loss, optimiser step and
// Polyak update per mini-batch. The covariate standardiser is fitted on units.
TrainResult train(const std::vector<const synth::Trajectory*>& units, const synth::TreatmentPlan& plan,
                  const model::ModelConfig& model_config, const TrainConfig& config);

struct Fluctuation {
    std::vector<double> epsilon;    // per step
    std::vector<double> q1;         // targeted Q_1(a_1, H_1) per unit
    NuisanceEval targeted;          // q_obs and q_cf after fluctuation
    std::vector<std::size_t> iterations;
};

// Backward over t = tau..1: eps_t = argmin (1/n) sum_u W_{1:t} BCE(expit(logit Q_t(A_t) + eps), target)
// + lambda |eps|, target = targeted Q_{t+1}(a_{t+1}) (Y at tau). Guarded Newton
// with bisection fallback on [-10, 10].
Fluctuation ltmle_fluctuate(const NuisanceEval& ev, const WeightTable& weights,
                            const std::vector<double>& outcomes, double lambda);

// Weighted score sum_u W_{1:t} (Q_{t,eps}(A_t) - target_t) for every t.
std::vector<double> ltmle_scores(const Fluctuation& fl, const WeightTable& weights,
                                 const std::vector<double>& outcomes);

enum class EstimatorKind { plugin_ice, raw_sdr, ltmle };
EstimatorKind parse_estimator_kind(const std::string& s);
std::string to_string(EstimatorKind k);

struct EstimateOptions {
    double lambda = 1e-3;
    double g_min = 0.01;
    bool clip_raw_sdr = false;
};

struct EstimateReport {
    std::string estimator;
    std::string plan_id;
    double psi_scaled = 0.0;
    double psi_unscaled = 0.0;
    double se_plugin = 0.0;      // unscaled, full influence function incl. Q_1 - psi
    double se_conditional = 0.0; // unscaled, sqrt(mean(D*^2) / n)
    double clip_rate = 0.0;
    double weight_max = 0.0;
    double weight_p99 = 0.0;
    std::size_t truncated = 0;
    std::vector<double> epsilons;
    std::vector<double> xi;
    std::vector<double> q1;      // per-unit contributions (scaled)
    std::string config_hash;
    std::uint64_t seed = 0;
};

EstimateReport estimate_from_eval(const NuisanceEval& ev, const std::vector<double>& outcomes, EstimatorKind kind,
                                  const EstimateOptions& opts, double y_min, double y_max);

EstimateReport estimate(const std::vector<const synth::Trajectory*>& units, double y_min, double y_max,
                        const model::NuisanceModel& model, const synth::TreatmentPlan& plan, EstimatorKind kind,
                        const EstimateOptions& opts);

// Nuisances of a trained model on a set of units under a plan.
NuisanceEval evaluate_units(const model::NuisanceModel& model, const std::vector<const synth::Trajectory*>& units,
                            const synth::TreatmentPlan& plan);

// One report as a JSON object (the per-unit q1 array is omitted).
std::string to_json(const EstimateReport& r);
EstimateReport report_from_json(const std::string& text);

} // namespace longdr::est
