#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "longdr/estimators/estimators.hpp"
#include "longdr/model/model.hpp"
#include "longdr/synth/dgp.hpp"
#include "longdr/synth/oracle.hpp"
#include "longdr/synth/plans.hpp"

namespace longdr::harness {

// Final-stage units come first in the simulated dataset: [0, final_train) are
// the training units and the next `test` units are held out. Tuning splits the
// final training block into tune_train / tune_val.
struct Splits {
    std::size_t tune_train = 800;
    std::size_t tune_val = 200;
    std::size_t final_train = 1000;
    std::size_t test = 500;
};

enum class DivergencePolicy { include_and_flag, exclude };
DivergencePolicy parse_divergence_policy(const std::string& s);
std::string to_string(DivergencePolicy p);

// One training configuration of the 2x2 ablation grid.
struct TrainingVariant {
    std::string label;
    bool use_sdr = true;
    bool use_simulator = true;

    bool operator==(const TrainingVariant&) const = default;
};

TrainingVariant full_variant();                  // SDR targets + simulator
std::vector<TrainingVariant> ablation_variants(); // the 2x2 grid, full variant first

struct ExperimentConfig {
    synth::DgpConfig dgp;  // n, n_val and n_test are derived from splits
    synth::Cf4Reading cf4 = synth::Cf4Reading::six_to_tau;
    std::vector<std::string> plans{"CF1", "CF2", "CF3", "CF4"};
    model::ModelConfig model; // covariate_dim and tau are derived from dgp
    est::TrainConfig train;   // use_sdr/use_simulator are overridden per variant
    std::vector<TrainingVariant> variants{full_variant()};
    std::vector<est::EstimatorKind> estimators{est::EstimatorKind::plugin_ice, est::EstimatorKind::raw_sdr,
                                               est::EstimatorKind::ltmle};
    est::EstimateOptions estimate;
    std::vector<std::uint64_t> seeds;
    Splits splits;
    std::size_t n_mc = 100000;
    std::uint64_t oracle_seed = 20240601;
    std::string cache_dir = ".longdr-cache";
    DivergencePolicy divergence = DivergencePolicy::include_and_flag;
    std::size_t workers = 1;

    ExperimentConfig();
    // Fills derived fields (dgp sizes, model dims) and checks the invariants.
    void resolve();
    void validate() const;
    std::string hash() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string to_json(const ExperimentConfig& c);

// Hyperparameters chosen by `tune` at tau = 15 for each surrogate variant.
void apply_tuned_defaults(ExperimentConfig& c);

struct RunRecord {
    std::uint64_t seed = 0;
    std::string variant;
    est::EstimateReport report;
    double truth = 0.0;
    double error = 0.0; // psi_unscaled - truth
    bool diverged = false;
    std::string message;
};

struct MetricsCell {
    std::string variant;
    std::string estimator;
    std::string plan_id;
    std::size_t runs = 0;     // runs entering the aggregate
    std::size_t diverged = 0; // flagged runs (included or not, per policy)
    double abs_bias_mean = 0.0;
    double abs_bias_std = 0.0; // population std over seeds
    double mean_error = 0.0;   // signed
    double rmse = 0.0;         // sqrt(mean(signed error^2))
    double truth = 0.0;
    double truth_se = 0.0;
};

struct MetricsTable {
    std::vector<MetricsCell> cells;
    const MetricsCell* find(const std::string& variant, const std::string& estimator, const std::string& plan) const;
};

MetricsTable aggregate(const std::vector<RunRecord>& runs, const std::map<std::string, synth::CapoTruth>& truths,
                       DivergencePolicy policy);

struct ExperimentResult {
    std::vector<RunRecord> runs; // ordered by (seed index, variant, plan, estimator)
    std::map<std::string, synth::CapoTruth> truths; // by plan id
    MetricsTable metrics;
};

using Progress = std::function<void(const std::string&)>;

ExperimentResult run_experiment(const ExperimentConfig& config, const Progress& progress = {});

// Hyperparameter search over a grid. Each axis lists candidate values.
struct TuneGrid {
    std::vector<std::size_t> batch{128, 256};
    std::vector<double> learning_rate{5e-4, 1e-3, 5e-3};
    std::vector<std::size_t> hidden{8, 16, 32};
    std::vector<double> dropout{0.0, 0.1};
    std::vector<std::size_t> layers{1, 2, 3};
    std::vector<std::size_t> heads{2, 4};
    std::vector<double> alpha{0.5, 1.0};
};

struct TuneCandidate {
    std::size_t batch = 128;
    double learning_rate = 1e-3;
    std::size_t hidden = 16;
    double dropout = 0.0;
    std::size_t layers = 1;
    std::size_t heads = 2;
    double alpha = 1.0;
    double val_loss = 0.0; // factual loss on tune_val, mean over plans

    void apply(ExperimentConfig& c) const;
};

struct TuneResult {
    TuneCandidate best;
    std::vector<TuneCandidate> tried; // in sampling order
};

// Random search: n_samples candidates drawn from the grid (seeded), each
// trained on tune_train of the first seed's dataset for every configured plan
// and scored by the factual loss on tune_val.
TuneResult tune(const ExperimentConfig& config, const TuneGrid& grid, std::size_t n_samples, std::uint64_t seed,
                const Progress& progress = {});

// Factual validation loss: mean over units of (Q_tau(A_tau, H_tau) - Y)^2 +
// sum_t BCE(G_t, A_t).
double factual_loss(const model::NuisanceModel& model, const std::vector<const synth::Trajectory*>& units);

struct AblationDelta {
    std::string variant;
    std::string plan_id;
    std::uint64_t seed = 0;
    double raw_abs_bias = 0.0;
    double ltmle_abs_bias = 0.0;
    double delta = 0.0; // ltmle - raw
};

struct AblationResult {
    ExperimentResult experiment;
    MetricsTable rows;  // variant x {raw, ltmle}: 8 variant rows per plan
    std::vector<AblationDelta> deltas;
};

// Runs the 2x2 training grid with raw and LTMLE estimates. "Raw" is the
// SDR estimate for SDR-trained variants and the plug-in ICE estimate otherwise.
AblationResult ablate(const ExperimentConfig& config, const Progress& progress = {});

std::string raw_estimator_for(const TrainingVariant& v);

// Artifacts. Reals are written with 17 significant digits.
enum class Format { csv, jsonl };
Format parse_format(const std::string& s);

void write_runs(const std::string& path, const std::vector<RunRecord>& runs, Format format);
std::vector<RunRecord> read_runs(const std::string& path, Format format);
void write_metrics_csv(const std::string& path, const MetricsTable& table);
void write_deltas_csv(const std::string& path, const std::vector<AblationDelta>& deltas);

// Run manifest: resolved config, code version, DGP reading choices, the
// positivity report of the first seed's design and the RMSE convention.
std::string manifest_json(const ExperimentConfig& config);
void write_text(const std::string& path, const std::string& text);

} // namespace longdr::harness
