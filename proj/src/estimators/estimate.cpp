#include <cmath>

#include <json.hpp>

#include "longdr/common/numeric.hpp"
#include "longdr/estimators/estimators.hpp"

namespace longdr::est {

EstimatorKind parse_estimator_kind(const std::string& s) {
    if (s == "plugin_ice") return EstimatorKind::plugin_ice;
    if (s == "raw_sdr") return EstimatorKind::raw_sdr;
    if (s == "ltmle") return EstimatorKind::ltmle;
    throw ConfigError("unknown estimator '" + s + "' (expected plugin_ice, raw_sdr or ltmle)");
}

std::string to_string(EstimatorKind k) {
    switch (k) {
    case EstimatorKind::plugin_ice: return "plugin_ice";
    case EstimatorKind::raw_sdr: return "raw_sdr";
    case EstimatorKind::ltmle: return "ltmle";
    }
    return "plugin_ice";
}

namespace {

std::vector<double> xi_against(const NuisanceEval& ev, const PseudoOutcomeTable& tab) {
    std::vector<double> xi(ev.tau, 0.0);
    if (ev.n == 0) return xi;
    for (std::size_t t = 0; t < ev.tau; ++t) {
        double s = 0.0;
        for (std::size_t u = 0; u < ev.n; ++u) {
            const double e = ev.q_obs[ev.idx(u, t)] - tab.target_for(u, t);
            s += e * e;
        }
        xi[t] = std::sqrt(s / static_cast<double>(ev.n));
    }
    return xi;
}

// sqrt(mean((phi - mean phi)^2) / n) for per-unit contributions phi.
double se_of(const std::vector<double>& phi) {
    if (phi.size() < 2) return 0.0;
    const double m = pairwise_mean(phi);
    std::vector<double> sq(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) sq[i] = (phi[i] - m) * (phi[i] - m);
    return std::sqrt(pairwise_mean(sq) / static_cast<double>(phi.size()));
}

double rms_over_n(const std::vector<double>& d) {
    if (d.empty()) return 0.0;
    std::vector<double> sq(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) sq[i] = d[i] * d[i];
    return std::sqrt(pairwise_mean(sq) / static_cast<double>(d.size()));
}

} // namespace

EstimateReport estimate_from_eval(const NuisanceEval& ev, const std::vector<double>& outcomes, EstimatorKind kind,
                                  const EstimateOptions& opts, double y_min, double y_max) {
    if (!(y_min < y_max)) throw ContractError("estimate: y_min must be below y_max");
    const auto weights = compute_weights(ev, opts.g_min);
    EstimateReport rep;
    rep.estimator = to_string(kind);
    rep.truncated = weights.truncated;
    rep.epsilons.assign(ev.tau, 0.0);

    std::vector<double> phi(ev.n), dstar;
    switch (kind) {
    case EstimatorKind::plugin_ice: {
        const auto tab = ice_targets(ev, outcomes);
        for (std::size_t u = 0; u < ev.n; ++u) rep.q1.push_back(tab.entry(u, 0));
        dstar = influence_function(ev, weights, outcomes);
        for (std::size_t u = 0; u < ev.n; ++u) phi[u] = rep.q1[u] + dstar[u];
        rep.xi = xi_against(ev, tab);
        break;
    }
    case EstimatorKind::raw_sdr: {
        const auto tab = sdr_targets(ev, weights, outcomes, opts.clip_raw_sdr);
        for (std::size_t u = 0; u < ev.n; ++u) rep.q1.push_back(tab.entry(u, 0));
        dstar = influence_function(ev, weights, outcomes);
        for (std::size_t u = 0; u < ev.n; ++u) phi[u] = tab.unclipped[u * (ev.tau + 1)];
        rep.clip_rate = tab.clip_rate();
        rep.xi = xi_against(ev, tab);
        break;
    }
    case EstimatorKind::ltmle: {
        const auto fl = ltmle_fluctuate(ev, weights, outcomes, opts.lambda);
        rep.q1 = fl.q1;
        rep.epsilons = fl.epsilon;
        dstar = influence_function(fl.targeted, weights, outcomes);
        for (std::size_t u = 0; u < ev.n; ++u) phi[u] = rep.q1[u] + dstar[u];
        rep.xi = xi_against(fl.targeted, ice_targets(fl.targeted, outcomes));
        break;
    }
    }

    rep.psi_scaled = pairwise_mean(rep.q1);
    const double range = y_max - y_min;
    rep.psi_unscaled = y_min + range * rep.psi_scaled;
    rep.se_plugin = range * se_of(phi);
    rep.se_conditional = range * rms_over_n(dstar);
    std::vector<double> w;
    w.reserve(weights.cum.size());
    for (double x : weights.cum)
        if (x > 0.0) w.push_back(x);
    rep.weight_max = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
    rep.weight_p99 = quantile(std::move(w), 0.99);
    return rep;
}

NuisanceEval evaluate_units(const model::NuisanceModel& model, const std::vector<const synth::Trajectory*>& units,
                            const synth::TreatmentPlan& plan) {
    const auto batch = model::make_batch(units, model.standardizer());
    std::vector<int> planned;
    planned.reserve(batch.n * batch.tau);
    for (const auto* tr : units) {
        const auto a = policy_actions(plan, *tr);
        planned.insert(planned.end(), a.begin(), a.end());
    }
    return model.evaluate(batch, planned);
}

EstimateReport estimate(const std::vector<const synth::Trajectory*>& units, double y_min, double y_max,
                        const model::NuisanceModel& model, const synth::TreatmentPlan& plan, EstimatorKind kind,
                        const EstimateOptions& opts) {
    plan.validate(model.config().tau);
    const auto ev = evaluate_units(model, units, plan);
    std::vector<double> y;
    y.reserve(units.size());
    for (const auto* tr : units) y.push_back(tr->outcome);
    auto rep = estimate_from_eval(ev, y, kind, opts, y_min, y_max);
    rep.plan_id = plan.id;
    return rep;
}

std::string to_json(const EstimateReport& r) {
    const nlohmann::json j{{"estimator", r.estimator},     {"plan_id", r.plan_id},
                           {"psi_scaled", r.psi_scaled},   {"psi_unscaled", r.psi_unscaled},
                           {"se_plugin", r.se_plugin},     {"se_conditional", r.se_conditional},
                           {"clip_rate", r.clip_rate},     {"weight_max", r.weight_max},
                           {"weight_p99", r.weight_p99},   {"truncated", r.truncated},
                           {"epsilons", r.epsilons},       {"xi", r.xi},
                           {"config_hash", r.config_hash}, {"seed", r.seed}};
    return j.dump();
}

EstimateReport report_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        EstimateReport r;
        r.estimator = j.at("estimator").get<std::string>();
        r.plan_id = j.at("plan_id").get<std::string>();
        r.psi_scaled = j.at("psi_scaled").get<double>();
        r.psi_unscaled = j.at("psi_unscaled").get<double>();
        r.se_plugin = j.at("se_plugin").get<double>();
        r.se_conditional = j.value("se_conditional", 0.0);
        r.clip_rate = j.at("clip_rate").get<double>();
        r.weight_max = j.at("weight_max").get<double>();
        r.weight_p99 = j.at("weight_p99").get<double>();
        r.truncated = j.value("truncated", std::size_t{0});
        r.epsilons = j.at("epsilons").get<std::vector<double>>();
        r.xi = j.at("xi").get<std::vector<double>>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("estimate report", e.what());
    }
}

} // namespace longdr::est
