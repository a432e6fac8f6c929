#include <set>

#include <json.hpp>

#include "longdr/harness/harness.hpp"

namespace longdr::harness {

using nlohmann::json;

DivergencePolicy parse_divergence_policy(const std::string& s) {
    if (s == "include_and_flag") return DivergencePolicy::include_and_flag;
    if (s == "exclude") return DivergencePolicy::exclude;
    throw ConfigError("unknown divergence policy '" + s + "' (expected include_and_flag or exclude)");
}

std::string to_string(DivergencePolicy p) {
    return p == DivergencePolicy::exclude ? "exclude" : "include_and_flag";
}

TrainingVariant full_variant() { return {"sdr+sim", true, true}; }

std::vector<TrainingVariant> ablation_variants() {
    return {full_variant(), {"sdr", true, false}, {"ice+sim", false, true}, {"ice", false, false}};
}

ExperimentConfig::ExperimentConfig() {
    for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
}

void ExperimentConfig::resolve() {
    dgp.n = splits.final_train + splits.test;
    dgp.n_val = 0;
    dgp.n_test = splits.test;
    model.covariate_dim = dgp.covariate_dim();
    model.tau = dgp.tau;
    validate();
}

void ExperimentConfig::validate() const {
    if (splits.final_train == 0 || splits.test == 0) throw ConfigError("final_train and test splits must be positive");
    if (splits.tune_train + splits.tune_val > splits.final_train)
        throw ConfigError("tune_train + tune_val must fit inside final_train");
    if (splits.final_train + splits.test > dgp.n) throw ConfigError("splits exceed the simulated sample size");
    dgp.validate();
    model.validate();
    if (model.tau != dgp.tau || model.covariate_dim != dgp.covariate_dim())
        throw ConfigError("model dimensions do not match the DGP (call resolve())");
    if (plans.empty()) throw ConfigError("no plans configured");
    for (const auto& p : plans) synth::plan_by_id(p, dgp.tau, cf4);
    if (estimators.empty()) throw ConfigError("no estimators configured");
    if (variants.empty()) throw ConfigError("no training variants configured");
    std::set<std::string> labels;
    for (const auto& v : variants)
        if (!labels.insert(v.label).second) throw ConfigError("duplicate variant label '" + v.label + "'");
    if (seeds.empty()) throw ConfigError("no seeds configured");
    if (n_mc < 2) throw ConfigError("n_mc must be at least 2");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (!(estimate.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
}

namespace {

json dgp_json(const synth::DgpConfig& d) {
    return {{"variant", synth::to_string(d.variant)},
            {"tau", d.tau},
            {"lag", d.lag},
            {"noise_std_ay", d.noise_std_ay},
            {"noise_std_z", d.noise_std_z},
            {"omega", {d.omega[0], d.omega[1], d.omega[2]}},
            {"coefficient_rule", synth::to_string(d.coefficient_rule)},
            {"seed", d.seed},
            {"outcome_ignores_treatment", d.outcome_ignores_treatment}};
}

synth::DgpConfig dgp_from(const json& j) {
    synth::DgpConfig d;
    if (j.contains("variant")) d.variant = synth::parse_variant(j.at("variant").get<std::string>());
    d.tau = j.value("tau", d.tau);
    d.lag = j.value("lag", d.lag);
    d.noise_std_ay = j.value("noise_std_ay", d.noise_std_ay);
    d.noise_std_z = j.value("noise_std_z", d.noise_std_z);
    if (j.contains("omega")) {
        const auto w = j.at("omega").get<std::vector<double>>();
        if (w.size() != 3) throw ConfigError("omega must have three entries");
        for (int i = 0; i < 3; ++i) d.omega[i] = w[i];
    }
    if (j.contains("coefficient_rule"))
        d.coefficient_rule = synth::parse_coefficient_rule(j.at("coefficient_rule").get<std::string>());
    d.seed = j.value("seed", d.seed);
    d.outcome_ignores_treatment = j.value("outcome_ignores_treatment", d.outcome_ignores_treatment);
    return d;
}

json train_json(const est::TrainConfig& t) {
    return {{"epochs", t.epochs},         {"batch", t.batch}, {"learning_rate", t.learning_rate},
            {"optimizer", ad::to_string(t.optimizer)}, {"clip", t.clip}, {"g_min", t.g_min}};
}

est::TrainConfig train_from(const json& j) {
    est::TrainConfig t;
    t.epochs = j.value("epochs", t.epochs);
    t.batch = j.value("batch", t.batch);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    if (j.contains("optimizer")) t.optimizer = ad::parse_optimizer_kind(j.at("optimizer").get<std::string>());
    t.clip = j.value("clip", t.clip);
    t.g_min = j.value("g_min", t.g_min);
    return t;
}

} // namespace

std::string to_json(const ExperimentConfig& c) {
    json variants = json::array();
    for (const auto& v : c.variants)
        variants.push_back({{"label", v.label}, {"use_sdr", v.use_sdr}, {"use_simulator", v.use_simulator}});
    std::vector<std::string> estimators;
    for (auto k : c.estimators) estimators.push_back(est::to_string(k));
    const json j{{"dgp", dgp_json(c.dgp)},
                 {"cf4_reading", c.cf4 == synth::Cf4Reading::literal ? "literal" : "six_to_tau"},
                 {"plans", c.plans},
                 {"model", json::parse(model::to_json(c.model))},
                 {"train", train_json(c.train)},
                 {"variants", variants},
                 {"estimators", estimators},
                 {"estimate",
                  {{"lambda", c.estimate.lambda},
                   {"g_min", c.estimate.g_min},
                   {"clip_raw_sdr", c.estimate.clip_raw_sdr}}},
                 {"seeds", c.seeds},
                 {"splits",
                  {{"tune_train", c.splits.tune_train},
                   {"tune_val", c.splits.tune_val},
                   {"final_train", c.splits.final_train},
                   {"test", c.splits.test}}},
                 {"n_mc", c.n_mc},
                 {"oracle_seed", c.oracle_seed},
                 {"cache_dir", c.cache_dir},
                 {"divergence", to_string(c.divergence)},
                 {"workers", c.workers}};
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ExperimentConfig c;
        if (j.contains("dgp")) c.dgp = dgp_from(j.at("dgp"));
        if (j.contains("cf4_reading")) {
            const auto r = j.at("cf4_reading").get<std::string>();
            if (r == "literal") c.cf4 = synth::Cf4Reading::literal;
            else if (r == "six_to_tau") c.cf4 = synth::Cf4Reading::six_to_tau;
            else throw ConfigError("unknown cf4_reading '" + r + "'");
        }
        if (j.contains("plans")) c.plans = j.at("plans").get<std::vector<std::string>>();
        if (j.contains("model")) c.model = model::model_config_from_json(j.at("model").dump());
        if (j.contains("train")) c.train = train_from(j.at("train"));
        if (j.contains("variants")) {
            c.variants.clear();
            for (const auto& v : j.at("variants"))
                c.variants.push_back({v.at("label").get<std::string>(), v.value("use_sdr", true),
                                      v.value("use_simulator", true)});
        }
        if (j.contains("estimators")) {
            c.estimators.clear();
            for (const auto& e : j.at("estimators")) c.estimators.push_back(est::parse_estimator_kind(e.get<std::string>()));
        }
        if (j.contains("estimate")) {
            const auto& e = j.at("estimate");
            c.estimate.lambda = e.value("lambda", c.estimate.lambda);
            c.estimate.g_min = e.value("g_min", c.estimate.g_min);
            c.estimate.clip_raw_sdr = e.value("clip_raw_sdr", c.estimate.clip_raw_sdr);
        }
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("splits")) {
            const auto& s = j.at("splits");
            c.splits.tune_train = s.value("tune_train", c.splits.tune_train);
            c.splits.tune_val = s.value("tune_val", c.splits.tune_val);
            c.splits.final_train = s.value("final_train", c.splits.final_train);
            c.splits.test = s.value("test", c.splits.test);
        }
        c.n_mc = j.value("n_mc", c.n_mc);
        c.oracle_seed = j.value("oracle_seed", c.oracle_seed);
        c.cache_dir = j.value("cache_dir", c.cache_dir);
        if (j.contains("divergence")) c.divergence = parse_divergence_policy(j.at("divergence").get<std::string>());
        c.workers = j.value("workers", c.workers);
        c.resolve();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
}

// Execution knobs (worker count, cache location) do not change results and
// are left out of the identity.
std::string ExperimentConfig::hash() const {
    json j = json::parse(to_json(*this));
    j.erase("workers");
    j.erase("cache_dir");
    return synth::stable_hash(j.dump());
}

void TuneCandidate::apply(ExperimentConfig& c) const {
    c.train.batch = batch;
    c.train.learning_rate = learning_rate;
    c.model.hidden = hidden;
    c.model.dropout = dropout;
    c.model.layers = layers;
    c.model.heads = heads;
    c.model.alpha = alpha;
}

// Winners of `longdr tune` at tau=15, 16 samples, search seed 0.
void apply_tuned_defaults(ExperimentConfig& c) {
    TuneCandidate t;
    if (c.dgp.variant == synth::Variant::limited) {
        t.batch = 256;
        t.learning_rate = 1e-3;
        t.hidden = 16;
        t.dropout = 0.1;
        t.layers = 2;
        t.heads = 2;
        t.alpha = 1.0;
    } else {
        t.batch = 128;
        t.learning_rate = 5e-3;
        t.hidden = 8;
        t.dropout = 0.0;
        t.layers = 2;
        t.heads = 2;
        t.alpha = 1.0;
    }
    c.cf4 = synth::Cf4Reading::six_to_tau;
    t.apply(c);
}

} // namespace longdr::harness
