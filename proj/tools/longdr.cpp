// Command-line front end: dataset generation, the ground-truth oracle,
// training, estimation and the experiment harness.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "longdr/common/errors.hpp"
#include "longdr/estimators/estimators.hpp"
#include "longdr/harness/harness.hpp"
#include "longdr/model/model.hpp"
#include "longdr/synth/dataset_io.hpp"
#include "longdr/synth/oracle.hpp"

using namespace longdr;
using nlohmann::json;

namespace {

struct DgpFlags {
    std::string variant = "limited";
    std::string rule = "shifted";
    std::size_t tau = 10, n = 1500, n_val = 0, n_test = 500, lag = 8;
    std::uint64_t seed = 0;

    void add(CLI::App* app, bool sizes) {
        app->add_option("--variant", variant, "limited or expanded")->capture_default_str();
        app->add_option("--tau", tau, "horizon")->capture_default_str();
        app->add_option("--lag", lag, "lag of the intensity recursion")->capture_default_str();
        app->add_option("--coefficient-rule", rule, "shifted or paper_singular")->capture_default_str();
        app->add_option("--seed", seed, "simulation seed")->capture_default_str();
        if (sizes) {
            app->add_option("--n", n, "total units")->capture_default_str();
            app->add_option("--n-val", n_val, "validation units")->capture_default_str();
            app->add_option("--n-test", n_test, "test units")->capture_default_str();
        }
    }

    synth::DgpConfig build() const {
        synth::DgpConfig d;
        d.variant = synth::parse_variant(variant);
        d.coefficient_rule = synth::parse_coefficient_rule(rule);
        d.tau = tau;
        d.n = n;
        d.n_val = n_val;
        d.n_test = n_test;
        d.lag = lag;
        d.seed = seed;
        d.validate();
        return d;
    }
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text << '\n';
    else harness::write_text(path, text + "\n");
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

harness::ExperimentConfig load_config(const std::string& path, bool tuned, std::size_t workers) {
    harness::ExperimentConfig c = path.empty() ? harness::ExperimentConfig{} : harness::config_from_json(read_text(path));
    if (tuned) harness::apply_tuned_defaults(c);
    if (workers) c.workers = workers;
    c.resolve();
    return c;
}

void write_experiment(const std::string& dir, const harness::ExperimentConfig& c, const harness::ExperimentResult& r,
                      harness::Format fmt) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);
    harness::write_runs((base / (fmt == harness::Format::csv ? "runs.csv" : "runs.jsonl")).string(), r.runs, fmt);
    harness::write_metrics_csv((base / "metrics.csv").string(), r.metrics);
    harness::write_text((base / "manifest.json").string(), harness::manifest_json(c) + "\n");
}

void print_metrics(const harness::MetricsTable& t) {
    std::printf("%-16s %-11s %-18s %5s %4s %10s %10s %10s %10s\n", "variant", "estimator", "plan", "runs", "div",
                "|bias|", "std", "rmse", "truth");
    for (const auto& c : t.cells)
        std::printf("%-16s %-11s %-18s %5zu %4zu %10.4f %10.4f %10.4f %10.4f\n", c.variant.c_str(),
                    c.estimator.c_str(), c.plan_id.c_str(), c.runs, c.diverged, c.abs_bias_mean, c.abs_bias_std,
                    c.rmse, c.truth);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Longitudinal doubly robust CAPO estimation on synthetic treatment data"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a dataset");
    DgpFlags sim_dgp;
    std::string sim_out;
    sim_dgp.add(sim, true);
    sim->add_option("-o,--out", sim_out, "dataset file (JSON lines)")->required();

    // oracle
    auto* orc = app.add_subcommand("oracle", "Monte Carlo ground truth for a plan");
    DgpFlags orc_dgp;
    std::string orc_plan = "CF1", orc_cache, orc_out, orc_cf4 = "six_to_tau";
    std::size_t orc_n_mc = 100000;
    std::uint64_t orc_seed = 20240601;
    orc_dgp.add(orc, false);
    orc->add_option("--plan", orc_plan, "CF1..CF4, always, never or threshold:<dim>:<value>")->capture_default_str();
    orc->add_option("--cf4", orc_cf4, "six_to_tau or literal")->capture_default_str();
    orc->add_option("--n-mc", orc_n_mc, "Monte Carlo trajectories")->capture_default_str();
    orc->add_option("--oracle-seed", orc_seed, "Monte Carlo seed")->capture_default_str();
    orc->add_option("--cache-dir", orc_cache, "memoise results here");
    orc->add_option("-o,--out", orc_out, "record file (default stdout)");

    // train
    auto* trn = app.add_subcommand("train", "train the nuisance transformer on a dataset");
    std::string trn_data, trn_plan = "CF1", trn_out, trn_trace, trn_optimizer = "adam", trn_cf4 = "six_to_tau";
    model::ModelConfig mc;
    est::TrainConfig tc;
    bool no_sdr = false, no_sim = false, no_clip = false;
    trn->add_option("--data", trn_data, "dataset file")->required();
    trn->add_option("--plan", trn_plan, "treatment plan")->capture_default_str();
    trn->add_option("--cf4", trn_cf4, "six_to_tau or literal")->capture_default_str();
    trn->add_option("--hidden", mc.hidden)->capture_default_str();
    trn->add_option("--layers", mc.layers)->capture_default_str();
    trn->add_option("--heads", mc.heads)->capture_default_str();
    trn->add_option("--dropout", mc.dropout)->capture_default_str();
    trn->add_option("--alpha", mc.alpha, "weight of the G/S losses")->capture_default_str();
    trn->add_option("--target-rate", mc.target_rate, "Polyak rate of the target network")->capture_default_str();
    trn->add_option("--horizon-heads", mc.horizon_heads, "G/S heads per step")->capture_default_str();
    trn->add_option("--epochs", tc.epochs)->capture_default_str();
    trn->add_option("--batch", tc.batch)->capture_default_str();
    trn->add_option("--lr", tc.learning_rate)->capture_default_str();
    trn->add_option("--optimizer", trn_optimizer, "adam or sgd")->capture_default_str();
    trn->add_option("--g-min", tc.g_min, "propensity truncation")->capture_default_str();
    trn->add_option("--seed", tc.seed)->capture_default_str();
    trn->add_flag("--no-sdr", no_sdr, "plain ICE targets");
    trn->add_flag("--no-simulator", no_sim, "drop the covariate simulator loss");
    trn->add_flag("--no-clip", no_clip, "do not clip SDR targets to [0,1]");
    trn->add_option("-o,--out", trn_out, "checkpoint file")->required();
    trn->add_option("--trace", trn_trace, "per-epoch losses as CSV");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "estimate a CAPO with a trained checkpoint");
    std::string est_ckpt, est_data, est_plan = "CF1", est_kind = "ltmle", est_split = "test", est_out,
                                    est_cf4 = "six_to_tau";
    est::EstimateOptions eo;
    est_cmd->add_option("--checkpoint", est_ckpt)->required();
    est_cmd->add_option("--data", est_data)->required();
    est_cmd->add_option("--plan", est_plan)->capture_default_str();
    est_cmd->add_option("--cf4", est_cf4, "six_to_tau or literal")->capture_default_str();
    est_cmd->add_option("--estimator", est_kind, "plugin_ice, raw_sdr or ltmle")->capture_default_str();
    est_cmd->add_option("--split", est_split, "train, val or test")->capture_default_str();
    est_cmd->add_option("--lambda", eo.lambda, "L1 penalty of the fluctuation")->capture_default_str();
    est_cmd->add_option("--g-min", eo.g_min)->capture_default_str();
    est_cmd->add_flag("--clip-raw-sdr", eo.clip_raw_sdr, "clip the raw SDR table");
    est_cmd->add_option("-o,--out", est_out, "report file (default stdout)");

    // config
    auto* cfg = app.add_subcommand("config", "print an experiment config");
    std::size_t cfg_tau = 10;
    std::string cfg_variant = "limited";
    bool cfg_tuned = true;
    cfg->add_option("--tau", cfg_tau)->capture_default_str();
    cfg->add_option("--variant", cfg_variant)->capture_default_str();
    cfg->add_option("--tuned", cfg_tuned, "apply the tuned hyperparameters")->capture_default_str();

    // bench / tune / ablate share the config flags
    std::string cfg_path, out_dir = "results", format = "csv";
    bool tuned = false;
    std::size_t workers = 0;
    auto config_flags = [&](CLI::App* c) {
        c->add_option("--config", cfg_path, "experiment config (JSON)");
        c->add_flag("--tuned", tuned, "overlay the tuned hyperparameters");
        c->add_option("--workers", workers, "parallel jobs (overrides the config)");
    };
    auto* bench = app.add_subcommand("bench", "run the experiment protocol");
    config_flags(bench);
    bench->add_option("--out", out_dir, "output directory")->capture_default_str();
    bench->add_option("--format", format, "csv or jsonl")->capture_default_str();

    auto* tun = app.add_subcommand("tune", "random hyperparameter search");
    std::size_t samples = 20;
    std::uint64_t tune_seed = 0;
    std::string tune_out;
    config_flags(tun);
    tun->add_option("--samples", samples)->capture_default_str();
    tun->add_option("--search-seed", tune_seed)->capture_default_str();
    tun->add_option("-o,--out", tune_out, "result file (default stdout)");

    auto* abl = app.add_subcommand("ablate", "SDR x simulator grid, raw vs LTMLE");
    config_flags(abl);
    abl->add_option("--out", out_dir, "output directory")->capture_default_str();
    abl->add_option("--format", format, "csv or jsonl")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    auto cf4_of = [](const std::string& s) {
        if (s == "literal") return synth::Cf4Reading::literal;
        if (s == "six_to_tau") return synth::Cf4Reading::six_to_tau;
        throw ConfigError("unknown cf4 reading '" + s + "'");
    };

    try {
        if (sim->parsed()) {
            const auto ds = synth::simulate(sim_dgp.build());
            synth::write_dataset(sim_out, ds);
            std::cerr << "wrote " << ds.trajectories.size() << " units to " << sim_out << "\n";
        } else if (orc->parsed()) {
            const auto d = orc_dgp.build();
            const auto plan = synth::plan_by_id(orc_plan, d.tau, cf4_of(orc_cf4));
            const auto t = synth::cached_ground_truth(d, plan, orc_n_mc, orc_seed, orc_cache);
            const json j{{"plan", plan.id},           {"plan_spec", plan.canonical()}, {"dgp", json::parse(d.canonical())},
                         {"mean", t.mean},            {"se", t.se},                    {"n_mc", t.n_mc},
                         {"oracle_seed", orc_seed}};
            emit(orc_out, j.dump(2));
        } else if (trn->parsed()) {
            const auto ds = synth::read_dataset(trn_data);
            mc.covariate_dim = ds.d;
            mc.tau = ds.tau;
            tc.optimizer = ad::parse_optimizer_kind(trn_optimizer);
            tc.use_sdr = !no_sdr;
            tc.use_simulator = !no_sim;
            tc.clip = !no_clip;
            const auto plan = synth::plan_by_id(trn_plan, ds.tau, cf4_of(trn_cf4));
            const auto units = ds.select(synth::Split::train);
            est::TrainResult res;
            try {
                res = est::train(units, plan, mc, tc);
            } catch (const est::TrainingDiverged& e) {
                std::cerr << "training diverged: " << e.what() << "\n";
                return 3;
            }
            model::save_checkpoint(trn_out, res.live);
            if (!trn_trace.empty()) {
                std::ostringstream csv;
                csv << "epoch,loss,loss_q,loss_g,loss_s,clip_rate\n";
                for (std::size_t e = 0; e < res.trace.epochs.size(); ++e) {
                    const auto& r = res.trace.epochs[e];
                    char buf[256];
                    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e + 1, r.loss, r.loss_q,
                                  r.loss_g, r.loss_s, r.clip_rate);
                    csv << buf;
                }
                harness::write_text(trn_trace, csv.str());
            }
            if (!res.trace.epochs.empty())
                std::cerr << "final epoch loss " << res.trace.epochs.back().loss << " (L_Q "
                          << res.trace.epochs.back().loss_q << ")\n";
        } else if (est_cmd->parsed()) {
            const auto ds = synth::read_dataset(est_data);
            const auto m = model::load_checkpoint(est_ckpt);
            const auto plan = synth::plan_by_id(est_plan, ds.tau, cf4_of(est_cf4));
            const auto units = ds.select(synth::parse_split(est_split));
            if (units.empty()) throw ConfigError("split '" + est_split + "' has no units");
            auto report = est::estimate(units, ds.y_min, ds.y_max, m, plan, est::parse_estimator_kind(est_kind), eo);
            report.seed = ds.seed;
            emit(est_out, est::to_json(report));
        } else if (cfg->parsed()) {
            harness::ExperimentConfig c;
            c.dgp.tau = cfg_tau;
            c.dgp.variant = synth::parse_variant(cfg_variant);
            if (cfg_tuned) harness::apply_tuned_defaults(c);
            c.resolve();
            std::cout << harness::to_json(c) << '\n';
        } else if (bench->parsed()) {
            const auto c = load_config(cfg_path, tuned, workers);
            const auto res = harness::run_experiment(c, log_line);
            write_experiment(out_dir, c, res, harness::parse_format(format));
            print_metrics(res.metrics);
        } else if (tun->parsed()) {
            const auto c = load_config(cfg_path, tuned, workers);
            const auto res = harness::tune(c, harness::TuneGrid{}, samples, tune_seed, log_line);
            auto cand = [](const harness::TuneCandidate& t) {
                return json{{"batch", t.batch},   {"learning_rate", t.learning_rate}, {"hidden", t.hidden},
                            {"dropout", t.dropout}, {"layers", t.layers},             {"heads", t.heads},
                            {"alpha", t.alpha},   {"val_loss", t.val_loss}};
            };
            json tried = json::array();
            for (const auto& t : res.tried) tried.push_back(cand(t));
            emit(tune_out, json{{"config_hash", c.hash()}, {"best", cand(res.best)}, {"tried", tried}}.dump(2));
        } else if (abl->parsed()) {
            const auto c = load_config(cfg_path, tuned, workers);
            const auto res = harness::ablate(c, log_line);
            auto resolved = c;
            resolved.variants = harness::ablation_variants();
            write_experiment(out_dir, resolved, res.experiment, harness::parse_format(format));
            harness::write_metrics_csv((std::filesystem::path(out_dir) / "ablation.csv").string(), res.rows);
            harness::write_deltas_csv((std::filesystem::path(out_dir) / "deltas.csv").string(), res.deltas);
            print_metrics(res.rows);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
