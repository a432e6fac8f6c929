#include <algorithm>
#include <cmath>

#include "longdr/common/numeric.hpp"
#include "longdr/estimators/estimators.hpp"

namespace longdr::est {

double step_weight(int planned, int factual, double g, double g_min) {
    if (planned != factual) return 0.0;
    const double gt = std::clamp(g, g_min, 1.0 - g_min);
    return 1.0 / (planned == 1 ? gt : 1.0 - gt);
}

WeightTable compute_weights(const NuisanceEval& ev, double g_min) {
    if (!(g_min > 0.0 && g_min < 0.5)) throw ConfigError("g_min must lie in (0, 0.5)");
    WeightTable wt;
    wt.n = ev.n;
    wt.tau = ev.tau;
    wt.w.resize(ev.n * ev.tau);
    wt.cum.resize(ev.n * ev.tau);
    for (std::size_t u = 0; u < ev.n; ++u) {
        double run = 1.0;
        for (std::size_t t = 0; t < ev.tau; ++t) {
            const std::size_t r = ev.idx(u, t);
            const double g = ev.g[r];
            if (g < g_min || g > 1.0 - g_min) ++wt.truncated;
            wt.w[r] = step_weight(ev.planned[r], ev.factual[r], g, g_min);
            run *= wt.w[r];
            wt.cum[r] = run;
        }
    }
    return wt;
}

double PseudoOutcomeTable::clip_rate() const {
    // Entry tau is the outcome itself and never clipped; entry 0 is not a target.
    std::size_t count = 0, total = 0;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t k = 1; k < tau; ++k) {
            count += clipped[u * (tau + 1) + k];
            ++total;
        }
    return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

namespace {

void check_outcomes(const NuisanceEval& ev, const std::vector<double>& outcomes) {
    if (outcomes.size() != ev.n) throw ContractError("one outcome per unit required");
}

} // namespace

PseudoOutcomeTable ice_targets(const NuisanceEval& ev, const std::vector<double>& outcomes) {
    check_outcomes(ev, outcomes);
    PseudoOutcomeTable tab;
    tab.n = ev.n;
    tab.tau = ev.tau;
    tab.kind = TargetKind::ice;
    const std::size_t width = ev.tau + 1;
    tab.value.resize(ev.n * width);
    tab.clipped.assign(ev.n * width, 0);
    for (std::size_t u = 0; u < ev.n; ++u) {
        for (std::size_t k = 0; k < ev.tau; ++k) tab.value[u * width + k] = ev.q_cf[ev.idx(u, k)];
        tab.value[u * width + ev.tau] = outcomes[u];
    }
    tab.unclipped = tab.value;
    return tab;
}

PseudoOutcomeTable sdr_targets(const NuisanceEval& ev, const WeightTable& weights,
                               const std::vector<double>& outcomes, bool clip) {
    check_outcomes(ev, outcomes);
    if (weights.n != ev.n || weights.tau != ev.tau) throw ContractError("weights and evaluations are not aligned");
    PseudoOutcomeTable tab;
    tab.n = ev.n;
    tab.tau = ev.tau;
    tab.kind = TargetKind::sdr;
    const std::size_t width = ev.tau + 1;
    tab.unclipped.resize(ev.n * width);
    tab.value.resize(ev.n * width);
    tab.clipped.assign(ev.n * width, 0);
    for (std::size_t u = 0; u < ev.n; ++u) {
        double* row = tab.unclipped.data() + u * width;
        row[ev.tau] = outcomes[u];
        for (std::size_t k = ev.tau; k-- > 0;) {
            const std::size_t r = ev.idx(u, k);
            const double w = weights.w[r];
            // A zero weight cuts every later product; keep the plug-in value exactly.
            row[k] = w == 0.0 ? ev.q_cf[r] : ev.q_cf[r] + w * (row[k + 1] - ev.q_obs[r]);
        }
        for (std::size_t k = 0; k < width; ++k) {
            const double v = row[k];
            const double c = clip ? clip01(v) : v;
            tab.value[u * width + k] = c;
            tab.clipped[u * width + k] = c != v;
        }
    }
    return tab;
}

std::vector<double> influence_function(const NuisanceEval& ev, const WeightTable& weights,
                                       const std::vector<double>& outcomes) {
    check_outcomes(ev, outcomes);
    std::vector<double> d(ev.n, 0.0);
    for (std::size_t u = 0; u < ev.n; ++u) {
        double s = 0.0;
        for (std::size_t t = 0; t < ev.tau; ++t) {
            const std::size_t r = ev.idx(u, t);
            const double W = weights.cum[r];
            if (W == 0.0) break; // every later product shares this factor
            const double next = t + 1 == ev.tau ? outcomes[u] : ev.q_cf[r + 1];
            s += W * (next - ev.q_obs[r]);
        }
        d[u] = s;
    }
    return d;
}

std::vector<int> policy_actions(const synth::TreatmentPlan& plan, const synth::Trajectory& tr) {
    const std::size_t tau = tr.actions.size();
    if (plan.kind == synth::TreatmentPlan::Kind::fixed) {
        plan.validate(tau);
        return plan.sequence;
    }
    std::vector<int> out(tau);
    for (std::size_t t = 0; t < tau; ++t) out[t] = plan.action(tr.covariates, tr.actions, t);
    return out;
}

} // namespace longdr::est
