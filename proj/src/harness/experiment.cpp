#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "longdr/common/numeric.hpp"
#include "longdr/harness/harness.hpp"
#include "longdr/synth/dataset_io.hpp"

namespace longdr::harness {

const MetricsCell* MetricsTable::find(const std::string& variant, const std::string& estimator,
                                      const std::string& plan) const {
    for (const auto& c : cells)
        if (c.variant == variant && c.estimator == estimator && c.plan_id == plan) return &c;
    return nullptr;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

synth::DgpConfig seeded_dgp(const ExperimentConfig& c, std::uint64_t seed) {
    synth::DgpConfig d = c.dgp;
    d.seed = c.dgp.seed + seed;
    return d;
}

struct Job {
    std::size_t seed_index;
    std::size_t variant;
    std::size_t plan;
};

// Runs jobs on `workers` threads; results land in job order so the output
// does not depend on scheduling.
template <class Fn>
void run_pool(std::size_t jobs, std::size_t workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < jobs; i = next++) fn(i);
    };
    if (workers <= 1 || jobs <= 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < std::min(workers, jobs); ++w)
        pool.emplace_back([&] {
            try {
                loop();
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs;
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& input, const Progress& progress) {
    ExperimentConfig config = input;
    config.resolve();
    const std::string hash = config.hash();
    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        if (!progress) return;
        std::lock_guard lock(log_mutex);
        progress(msg);
    };

    ExperimentResult result;
    std::vector<synth::TreatmentPlan> plans;
    for (const auto& id : config.plans) {
        plans.push_back(synth::plan_by_id(id, config.dgp.tau, config.cf4));
        result.truths[id] =
            synth::cached_ground_truth(config.dgp, plans.back(), config.n_mc, config.oracle_seed, config.cache_dir);
        log("truth " + id + " = " + synth::format_real(result.truths[id].mean));
    }

    std::vector<synth::Dataset> data;
    for (auto s : config.seeds) data.push_back(synth::simulate(seeded_dgp(config, s)));

    std::vector<Job> jobs;
    for (std::size_t s = 0; s < config.seeds.size(); ++s)
        for (std::size_t v = 0; v < config.variants.size(); ++v)
            for (std::size_t p = 0; p < plans.size(); ++p) jobs.push_back({s, v, p});

    const std::size_t per_job = config.estimators.size();
    std::vector<RunRecord> runs(jobs.size() * per_job);
    run_pool(jobs.size(), config.workers, [&](std::size_t j) {
        const Job& job = jobs[j];
        const auto& ds = data[job.seed_index];
        const auto& variant = config.variants[job.variant];
        const auto& plan = plans[job.plan];
        const std::uint64_t seed = config.seeds[job.seed_index];

        est::TrainConfig tc = config.train;
        tc.use_sdr = variant.use_sdr;
        tc.use_simulator = variant.use_simulator;
        tc.seed = seed;
        bool diverged = false;
        std::string message;
        model::NuisanceModel fitted;
        try {
            fitted = est::train(ds.select(synth::Split::train), plan, config.model, tc).live;
        } catch (const est::TrainingDiverged& e) {
            diverged = true;
            message = e.what();
            if (e.last_model()) fitted = *e.last_model();
        }

        const auto test = ds.select(synth::Split::test);
        for (std::size_t k = 0; k < per_job; ++k) {
            RunRecord& r = runs[j * per_job + k];
            r.seed = seed;
            r.variant = variant.label;
            r.diverged = diverged;
            r.message = message;
            r.truth = result.truths.at(plan.id).mean;
            const auto kind = config.estimators[k];
            bool have_model = !fitted.params().empty();
            if (have_model) {
                try {
                    r.report = est::estimate(test, ds.y_min, ds.y_max, fitted, plan, kind, config.estimate);
                } catch (const EstimatorError& e) {
                    r.diverged = true;
                    r.message = e.what();
                    have_model = false;
                }
            }
            if (!have_model) {
                r.report = est::EstimateReport{};
                r.report.psi_scaled = r.report.psi_unscaled = kNaN;
            }
            r.report.estimator = est::to_string(kind);
            r.report.plan_id = plan.id;
            r.report.config_hash = hash;
            r.report.seed = seed;
            r.report.q1.clear();
            r.error = r.report.psi_unscaled - r.truth;
        }
        log("seed " + std::to_string(seed) + " " + variant.label + " " + plan.id + (diverged ? " (diverged)" : ""));
    });

    result.runs = std::move(runs);
    result.metrics = aggregate(result.runs, result.truths, config.divergence);
    return result;
}

MetricsTable aggregate(const std::vector<RunRecord>& runs, const std::map<std::string, synth::CapoTruth>& truths,
                       DivergencePolicy policy) {
    MetricsTable table;
    std::vector<std::vector<double>> errors;
    for (const auto& r : runs) {
        MetricsCell* cell = nullptr;
        for (std::size_t i = 0; i < table.cells.size(); ++i) {
            auto& c = table.cells[i];
            if (c.variant == r.variant && c.estimator == r.report.estimator && c.plan_id == r.report.plan_id) {
                cell = &c;
                break;
            }
        }
        if (!cell) {
            MetricsCell c;
            c.variant = r.variant;
            c.estimator = r.report.estimator;
            c.plan_id = r.report.plan_id;
            if (auto it = truths.find(c.plan_id); it != truths.end()) {
                c.truth = it->second.mean;
                c.truth_se = it->second.se;
            } else {
                c.truth = r.truth;
            }
            table.cells.push_back(c);
            errors.emplace_back();
            cell = &table.cells.back();
        }
        const std::size_t idx = static_cast<std::size_t>(cell - table.cells.data());
        if (r.diverged) ++cell->diverged;
        if (r.diverged && policy == DivergencePolicy::exclude) continue;
        if (!std::isfinite(r.error)) continue; // no estimate exists for this run
        errors[idx].push_back(r.error);
    }
    for (std::size_t i = 0; i < table.cells.size(); ++i) {
        auto& c = table.cells[i];
        const auto& e = errors[i];
        c.runs = e.size();
        if (e.empty()) {
            c.abs_bias_mean = c.abs_bias_std = c.mean_error = c.rmse = kNaN;
            continue;
        }
        std::vector<double> abs(e.size()), sq(e.size()), dev(e.size());
        for (std::size_t k = 0; k < e.size(); ++k) {
            abs[k] = std::abs(e[k]);
            sq[k] = e[k] * e[k];
        }
        c.abs_bias_mean = pairwise_mean(abs);
        for (std::size_t k = 0; k < e.size(); ++k) dev[k] = (abs[k] - c.abs_bias_mean) * (abs[k] - c.abs_bias_mean);
        c.abs_bias_std = std::sqrt(pairwise_mean(dev));
        c.mean_error = pairwise_mean(e);
        c.rmse = std::sqrt(pairwise_mean(sq));
    }
    return table;
}

} // namespace longdr::harness
