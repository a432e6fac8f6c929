#include <cmath>
#include <limits>
#include <random>

#include "longdr/common/numeric.hpp"
#include "longdr/harness/harness.hpp"

namespace longdr::harness {

double factual_loss(const model::NuisanceModel& model, const std::vector<const synth::Trajectory*>& units) {
    if (units.empty()) throw ContractError("factual_loss: no units");
    const auto batch = model::make_batch(units, model.standardizer());
    const auto ev = model.evaluate(batch, batch.factual);
    const std::size_t tau = ev.tau;
    std::vector<double> per_unit(ev.n);
    for (std::size_t u = 0; u < ev.n; ++u) {
        const double e = ev.q_obs[ev.idx(u, tau - 1)] - units[u]->outcome;
        double l = e * e;
        for (std::size_t t = 0; t < tau; ++t) {
            const double g = ev.g[ev.idx(u, t)];
            l -= ev.factual[ev.idx(u, t)] == 1 ? std::log(g) : std::log1p(-g);
        }
        per_unit[u] = l;
    }
    return pairwise_mean(per_unit);
}

namespace {

template <class T>
const T& pick(const std::vector<T>& axis, std::mt19937_64& rng, const char* name) {
    if (axis.empty()) throw ConfigError(std::string("tuning grid axis '") + name + "' is empty");
    return axis[std::uniform_int_distribution<std::size_t>(0, axis.size() - 1)(rng)];
}

} // namespace

TuneResult tune(const ExperimentConfig& input, const TuneGrid& grid, std::size_t n_samples, std::uint64_t seed,
                const Progress& progress) {
    if (n_samples == 0) throw ConfigError("tune needs at least one sample");
    ExperimentConfig config = input;
    config.resolve();
    synth::DgpConfig dgp = config.dgp;
    dgp.seed = config.dgp.seed + config.seeds.front();
    const auto ds = synth::simulate(dgp);
    const auto train_units = ds.select(synth::Split::train);
    const std::vector<const synth::Trajectory*> fit(train_units.begin(),
                                                    train_units.begin() + static_cast<long>(config.splits.tune_train));
    const std::vector<const synth::Trajectory*> val(
        train_units.begin() + static_cast<long>(config.splits.tune_train),
        train_units.begin() + static_cast<long>(config.splits.tune_train + config.splits.tune_val));

    std::mt19937_64 rng(seed);
    TuneResult out;
    for (std::size_t i = 0; i < n_samples; ++i) {
        TuneCandidate c;
        c.batch = pick(grid.batch, rng, "batch");
        c.learning_rate = pick(grid.learning_rate, rng, "learning_rate");
        c.hidden = pick(grid.hidden, rng, "hidden");
        c.dropout = pick(grid.dropout, rng, "dropout");
        c.layers = pick(grid.layers, rng, "layers");
        c.heads = pick(grid.heads, rng, "heads");
        c.alpha = pick(grid.alpha, rng, "alpha");
        ExperimentConfig trial = config;
        c.apply(trial);
        trial.model.validate();

        const auto& variant = config.variants.front();
        est::TrainConfig tc = trial.train;
        tc.use_sdr = variant.use_sdr;
        tc.use_simulator = variant.use_simulator;
        tc.seed = config.seeds.front();
        double total = 0.0;
        for (const auto& id : config.plans) {
            const auto plan = synth::plan_by_id(id, config.dgp.tau, config.cf4);
            try {
                total += factual_loss(est::train(fit, plan, trial.model, tc).live, val);
            } catch (const est::TrainingDiverged&) {
                total = std::numeric_limits<double>::infinity();
                break;
            }
        }
        c.val_loss = total / static_cast<double>(config.plans.size());
        out.tried.push_back(c);
        if (progress) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "candidate %zu: batch %zu lr %g hidden %zu dropout %g layers %zu heads %zu "
                                           "alpha %g -> val %.6f",
                          i + 1, c.batch, c.learning_rate, c.hidden, c.dropout, c.layers, c.heads, c.alpha, c.val_loss);
            progress(buf);
        }
        if (i == 0 || c.val_loss < out.best.val_loss) out.best = c;
    }
    return out;
}

std::string raw_estimator_for(const TrainingVariant& v) {
    return est::to_string(v.use_sdr ? est::EstimatorKind::raw_sdr : est::EstimatorKind::plugin_ice);
}

AblationResult ablate(const ExperimentConfig& input, const Progress& progress) {
    ExperimentConfig config = input;
    config.variants = ablation_variants();
    config.estimators = {est::EstimatorKind::plugin_ice, est::EstimatorKind::raw_sdr, est::EstimatorKind::ltmle};
    AblationResult out;
    out.experiment = run_experiment(config, progress);

    // Relabel each variant's raw and LTMLE runs into the 8-row layout.
    std::vector<RunRecord> rows;
    const std::string ltmle = est::to_string(est::EstimatorKind::ltmle);
    for (const auto& r : out.experiment.runs) {
        const TrainingVariant* v = nullptr;
        for (const auto& cand : config.variants)
            if (cand.label == r.variant) v = &cand;
        const bool is_raw = r.report.estimator == raw_estimator_for(*v);
        if (!is_raw && r.report.estimator != ltmle) continue;
        RunRecord row = r;
        row.variant = r.variant + (is_raw ? "/raw" : "/ltmle");
        rows.push_back(std::move(row));
    }
    out.rows = aggregate(rows, out.experiment.truths, config.divergence);

    for (const auto& r : out.experiment.runs) {
        if (r.report.estimator != ltmle) continue;
        const TrainingVariant* v = nullptr;
        for (const auto& cand : config.variants)
            if (cand.label == r.variant) v = &cand;
        const std::string raw = raw_estimator_for(*v);
        for (const auto& q : out.experiment.runs) {
            if (q.seed != r.seed || q.variant != r.variant || q.report.plan_id != r.report.plan_id ||
                q.report.estimator != raw)
                continue;
            if ((r.diverged || q.diverged) && config.divergence == DivergencePolicy::exclude) break;
            AblationDelta d;
            d.variant = r.variant;
            d.plan_id = r.report.plan_id;
            d.seed = r.seed;
            d.raw_abs_bias = std::abs(q.error);
            d.ltmle_abs_bias = std::abs(r.error);
            d.delta = d.ltmle_abs_bias - d.raw_abs_bias;
            out.deltas.push_back(d);
            break;
        }
    }
    return out;
}

} // namespace longdr::harness
