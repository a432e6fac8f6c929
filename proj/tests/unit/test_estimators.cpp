#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "longdr/common/numeric.hpp"
#include "longdr/estimators/estimators.hpp"
#include "longdr/synth/plans.hpp"
#include "support/estimator_oracles.hpp"
#include "support/model_fixtures.hpp"

using namespace longdr;
using longdr::est::NuisanceEval;

namespace {

synth::Trajectory alternating_trajectory(std::size_t tau, std::size_t d) {
    synth::Trajectory tr;
    tr.covariates.assign(tau, std::vector<double>(d, 0.0));
    tr.actions.assign(tau, 0);
    for (std::size_t t = 0; t < tau; ++t) tr.covariates[t][0] = t % 2 == 0 ? 1.0 : -1.0;
    return tr;
}

std::vector<synth::Trajectory> tiny_units(std::size_t n, std::size_t tau, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::bernoulli_distribution coin(0.6);
    std::uniform_real_distribution<double> unif;
    std::vector<synth::Trajectory> out(n);
    for (std::size_t u = 0; u < n; ++u) {
        out[u].id = u;
        out[u].covariates.assign(tau, std::vector<double>(d));
        out[u].actions.resize(tau);
        for (std::size_t t = 0; t < tau; ++t) {
            for (auto& x : out[u].covariates[t]) x = nd(rng);
            out[u].actions[t] = coin(rng) ? 1 : 0;
        }
        out[u].outcome = unif(rng);
    }
    return out;
}

std::vector<const synth::Trajectory*> pointers(const std::vector<synth::Trajectory>& v) {
    std::vector<const synth::Trajectory*> p;
    for (const auto& t : v) p.push_back(&t);
    return p;
}

} // namespace

TEST(Weights, SpecExamples) {
    EXPECT_DOUBLE_EQ(est::step_weight(1, 1, 0.5, 0.01), 2.0);
    EXPECT_EQ(est::step_weight(1, 0, 0.3, 0.01), 0.0);
    EXPECT_EQ(est::step_weight(1, 0, 0.999, 0.01), 0.0);
    EXPECT_NEAR(est::step_weight(0, 0, 0.25, 0.01), 1.0 / 0.75, 1e-15);
}

TEST(Weights, TruncationBoundsAndRunningProduct) {
    NuisanceEval ev(1, 3);
    ev.g = {0.0001, 0.5, 0.99999};
    ev.factual = {1, 0, 0};
    ev.planned = {1, 0, 0};
    const auto w = est::compute_weights(ev, 0.01);
    EXPECT_DOUBLE_EQ(w.w[0], 100.0);
    EXPECT_NEAR(w.w[2], 100.0, 1e-10);
    EXPECT_EQ(w.truncated, 2u);
    EXPECT_DOUBLE_EQ(w.cum[1], w.cum[0] * w.w[1]);
    EXPECT_DOUBLE_EQ(w.cum[2], w.cum[1] * w.w[2]);
    EXPECT_THROW(est::compute_weights(ev, 0.5), ConfigError);
}

TEST(Weights, PlanAndFactualDenominatorsAgree) {
    // The weight is nonzero only where A = a, so either action may sit in the denominator.
    for (int a : {0, 1})
        for (int A : {0, 1})
            for (double g : {0.003, 0.2, 0.7, 0.999}) {
                const double gt = std::clamp(g, 0.01, 0.99);
                const double factual_form = a == A ? 1.0 / (A * gt + (1 - A) * (1 - gt)) : 0.0;
                EXPECT_EQ(est::step_weight(a, A, g, 0.01), factual_form);
            }
}

TEST(Targets, IceUsesNextCounterfactualAndOutcome) {
    auto inst = longdr::testing::random_instance(4, 3, 3);
    inst.ev.g.assign(inst.ev.g.size(), 0.123);
    const auto tab = est::ice_targets(inst.ev, inst.y);
    for (std::size_t u = 0; u < 4; ++u) {
        EXPECT_EQ(tab.target_for(u, 2), inst.y[u]);
        for (std::size_t t = 0; t + 1 < 3; ++t) EXPECT_EQ(tab.target_for(u, t), inst.ev.q_cf[inst.ev.idx(u, t + 1)]);
    }
    auto ev2 = inst.ev;
    for (double& g : ev2.g) g = 0.9;
    EXPECT_EQ(est::ice_targets(ev2, inst.y).value, tab.value);
}

TEST(Targets, SdrHandExample) {
    NuisanceEval ev(1, 1);
    ev.q_cf = {0.4};
    ev.q_obs = {0.4};
    ev.g = {0.5};
    ev.factual = {1};
    ev.planned = {1};
    const auto tab = est::sdr_targets(ev, est::compute_weights(ev, 0.01), {0.6}, false);
    EXPECT_NEAR(tab.entry(0, 0), 0.8, 1e-15);
    EXPECT_EQ(tab.entry(0, 1), 0.6);
}

TEST(Targets, SdrOffPlanFirstSummandKeepsPlugIn) {
    auto inst = longdr::testing::random_instance(10, 4, 21);
    for (std::size_t u = 0; u < 10; ++u) inst.ev.planned[inst.ev.idx(u, 1)] = 1 - inst.ev.factual[inst.ev.idx(u, 1)];
    const auto tab = est::sdr_targets(inst.ev, est::compute_weights(inst.ev, 0.01), inst.y, false);
    for (std::size_t u = 0; u < 10; ++u) EXPECT_EQ(tab.entry(u, 1), inst.ev.q_cf[inst.ev.idx(u, 1)]);
}

TEST(Targets, SdrPerfectFitHasNoAugmentation) {
    auto inst = longdr::testing::random_instance(6, 3, 5);
    auto& ev = inst.ev;
    for (std::size_t u = 0; u < 6; ++u) {
        ev.q_obs[ev.idx(u, 2)] = inst.y[u];
        for (std::size_t t = 0; t + 1 < 3; ++t) ev.q_obs[ev.idx(u, t)] = ev.q_cf[ev.idx(u, t + 1)];
    }
    const auto w = est::compute_weights(ev, 0.01);
    const auto tab = est::sdr_targets(ev, w, inst.y, false);
    const auto d = est::influence_function(ev, w, inst.y);
    for (std::size_t u = 0; u < 6; ++u) {
        for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(tab.entry(u, t), ev.q_cf[ev.idx(u, t)]);
        EXPECT_EQ(d[u], 0.0);
    }
}

TEST(Targets, SdrAndInfluenceMatchBruteForce) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t tau = 1 + rng() % 4, n = 1 + rng() % 30;
        const auto inst = longdr::testing::random_instance(n, tau, 1000 + seed);
        const auto w = est::compute_weights(inst.ev, 0.01);
        const auto tab = est::sdr_targets(inst.ev, w, inst.y, false);
        const auto d = est::influence_function(inst.ev, w, inst.y);
        for (std::size_t u = 0; u < n; ++u) {
            for (std::size_t t = 0; t < tau; ++t) {
                const double ref = longdr::testing::brute_sdr(inst.ev, inst.y, u, t, 0.01);
                EXPECT_LE(std::abs(tab.entry(u, t) - ref), 1e-12 * std::max(1.0, std::abs(ref)));
            }
            const double dref = longdr::testing::brute_dstar(inst.ev, inst.y, u, 0.01);
            EXPECT_LE(std::abs(d[u] - dref), 1e-12 * std::max(1.0, std::abs(dref)));
        }
    }
}

TEST(Targets, InfluenceVanishesWhenFirstWeightIsZero) {
    auto inst = longdr::testing::random_instance(8, 3, 77);
    inst.ev.planned[inst.ev.idx(3, 0)] = 1 - inst.ev.factual[inst.ev.idx(3, 0)];
    const auto d = est::influence_function(inst.ev, est::compute_weights(inst.ev, 0.01), inst.y);
    EXPECT_EQ(d[3], 0.0);
}

TEST(Targets, ClippingIsMonotoneAndIdempotent) {
    auto inst = longdr::testing::random_instance(30, 4, 8, 0.02);
    const auto w = est::compute_weights(inst.ev, 0.01);
    const auto raw = est::sdr_targets(inst.ev, w, inst.y, false);
    const auto clipped = est::sdr_targets(inst.ev, w, inst.y, true);
    double max_raw = 0.0, max_clipped = 0.0;
    bool any_outside = false;
    for (std::size_t i = 0; i < raw.value.size(); ++i) {
        max_raw = std::max(max_raw, std::abs(raw.value[i]));
        max_clipped = std::max(max_clipped, std::abs(clipped.value[i]));
        EXPECT_GE(clipped.value[i], 0.0);
        EXPECT_LE(clipped.value[i], 1.0);
        if (raw.value[i] >= 0.0 && raw.value[i] <= 1.0) EXPECT_EQ(clipped.value[i], raw.value[i]);
        else any_outside = true;
        EXPECT_EQ(clip01(clipped.value[i]), clipped.value[i]);
        EXPECT_EQ(clipped.unclipped[i], raw.value[i]);
    }
    EXPECT_TRUE(any_outside);
    EXPECT_LE(max_clipped, max_raw);
    EXPECT_GT(clipped.clip_rate(), 0.0);
    EXPECT_EQ(raw.clip_rate(), 0.0);
}

TEST(Ltmle, SingleObservationClosedForm) {
    NuisanceEval ev(1, 1);
    ev.q_obs = {0.5};
    ev.q_cf = {0.5};
    ev.g = {0.5};
    ev.factual = {1};
    ev.planned = {1};
    est::WeightTable w{1, 1, {1.0}, {1.0}, 0};
    const auto fl = est::ltmle_fluctuate(ev, w, {0.8}, 0.0);
    EXPECT_NEAR(fl.epsilon[0], logit(0.8), 1e-9);
    EXPECT_NEAR(fl.q1[0], 0.8, 1e-9);
}

TEST(Ltmle, WeightedScoreEquationsHold) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t tau = 1 + rng() % 4, n = 10 + rng() % 50;
        const auto inst = longdr::testing::random_instance(n, tau, 500 + seed);
        const auto w = est::compute_weights(inst.ev, 0.01);
        const auto fl = est::ltmle_fluctuate(inst.ev, w, inst.y, 0.0);
        const auto scores = est::ltmle_scores(fl, w, inst.y);
        for (double s : scores) EXPECT_LE(std::abs(s), 1e-6 * static_cast<double>(n));
    }
}

TEST(Ltmle, ZeroWeightMassGivesZeroEpsilon) {
    auto inst = longdr::testing::random_instance(12, 3, 4);
    for (std::size_t u = 0; u < 12; ++u) inst.ev.planned[inst.ev.idx(u, 0)] = 1 - inst.ev.factual[inst.ev.idx(u, 0)];
    const auto fl = est::ltmle_fluctuate(inst.ev, est::compute_weights(inst.ev, 0.01), inst.y, 1e-3);
    for (double e : fl.epsilon) EXPECT_EQ(e, 0.0);
    for (std::size_t u = 0; u < 12; ++u) EXPECT_EQ(fl.q1[u], inst.ev.q_cf[u * 3]);
    EXPECT_EQ(fl.targeted.q_obs, inst.ev.q_obs);
}

TEST(Ltmle, PerfectFitGivesZeroEpsilon) {
    auto inst = longdr::testing::random_instance(9, 3, 6);
    auto& ev = inst.ev;
    for (std::size_t u = 0; u < 9; ++u) {
        inst.y[u] = ev.q_obs[ev.idx(u, 2)];
        for (std::size_t t = 0; t + 1 < 3; ++t) ev.q_cf[ev.idx(u, t + 1)] = ev.q_obs[ev.idx(u, t)];
    }
    const auto fl = est::ltmle_fluctuate(ev, est::compute_weights(ev, 0.01), inst.y, 0.0);
    for (double e : fl.epsilon) EXPECT_EQ(e, 0.0);
}

TEST(Ltmle, PenaltyShrinksTowardZero) {
    const auto inst = longdr::testing::random_instance(40, 2, 31);
    const auto w = est::compute_weights(inst.ev, 0.01);
    const auto big = est::ltmle_fluctuate(inst.ev, w, inst.y, 1e6);
    for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(big.epsilon[t], 0.0);
    EXPECT_THROW(est::ltmle_fluctuate(inst.ev, w, inst.y, -1.0), ConfigError);
}

TEST(Losses, SingleUnitExampleAndAlphaZero) {
    ad::Tape tape;
    const auto q = tape.constant(ad::Tensor(ad::Shape{1, 1}, {0.3}));
    const auto g = tape.constant(ad::Tensor(ad::Shape{1, 1}, {0.7}));
    const auto s = tape.constant(ad::Tensor(ad::Shape{1, 1}, {2.0}));
    est::LossInputs in;
    in.n = 1;
    in.tau = 1;
    in.d = 1;
    in.targets = {0.5};
    in.factual = {1};
    in.covariates = {0.1};
    const auto l = est::training_losses(q, g, s, in, 0.0, true);
    EXPECT_NEAR(l.total.value().item(), 0.04, 1e-15);
    EXPECT_EQ(l.total.value().item(), l.q.value().item());
    EXPECT_EQ(l.s.value().item(), 0.0); // no successor at the last step
    EXPECT_GT(l.g.value().item(), 0.0);
}

TEST(Losses, ComponentsAgainstDirectSums) {
    const std::size_t n = 3, tau = 3, d = 2;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    std::normal_distribution<double> nd;
    std::vector<double> qv(n * tau), gv(n * tau), sv(n * tau * d);
    est::LossInputs in;
    in.n = n;
    in.tau = tau;
    in.d = d;
    for (auto& x : qv) x = unif(rng);
    for (auto& x : gv) x = nd(rng);
    for (auto& x : sv) x = nd(rng);
    for (std::size_t r = 0; r < n * tau; ++r) {
        in.targets.push_back(unif(rng));
        in.factual.push_back(static_cast<int>(rng() % 2));
    }
    for (std::size_t i = 0; i < n * tau * d; ++i) in.covariates.push_back(nd(rng));
    ad::Tape tape;
    const auto l = est::training_losses(tape.constant(ad::Tensor(ad::Shape{n * tau, 1}, qv)),
                                        tape.constant(ad::Tensor(ad::Shape{n * tau, 1}, gv)),
                                        tape.constant(ad::Tensor(ad::Shape{n * tau, d}, sv)), in, 0.5, true);
    double lq = 0, lg = 0, ls = 0;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t t = 0; t < tau; ++t) {
            const std::size_t r = u * tau + t;
            lq += (qv[r] - in.targets[r]) * (qv[r] - in.targets[r]);
            const double p = expit(gv[r]);
            lg -= in.factual[r] ? std::log(p) : std::log(1 - p);
            if (t + 1 < tau)
                for (std::size_t j = 0; j < d; ++j) {
                    const double e = sv[r * d + j] - in.covariates[(r + 1) * d + j];
                    ls += e * e;
                }
        }
    lq /= n;
    lg /= n;
    ls /= static_cast<double>(n * d);
    EXPECT_NEAR(l.q.value().item(), lq, 1e-12);
    EXPECT_NEAR(l.g.value().item(), lg, 1e-12);
    EXPECT_NEAR(l.s.value().item(), ls, 1e-12);
    EXPECT_NEAR(l.total.value().item(), lq + 0.5 * (lg + ls), 1e-12);
}

TEST(Losses, NonFiniteComponentIsNamed) {
    ad::Tape tape;
    est::LossInputs in;
    in.n = 1;
    in.tau = 1;
    in.d = 1;
    in.targets = {std::nan("")};
    in.factual = {0};
    in.covariates = {0.0};
    try {
        est::training_losses(tape.constant(ad::Tensor(ad::Shape{1, 1}, {0.3})),
                             tape.constant(ad::Tensor(ad::Shape{1, 1}, {0.0})),
                             tape.constant(ad::Tensor(ad::Shape{1, 1}, {0.0})), in, 1.0, true);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("L_Q"), std::string::npos) << e.what();
    }
}

TEST(Losses, SimulatorOffLeavesSHeadWithoutGradient) {
    model::ModelConfig cfg;
    cfg.hidden = 8;
    cfg.covariate_dim = 3;
    cfg.tau = 4;
    const auto m = model::NuisanceModel::init(cfg, 2);
    const auto b = longdr::testing::random_batch(5, 4, 3, 9);
    est::LossInputs in;
    in.n = 5;
    in.tau = 4;
    in.d = 3;
    in.targets.assign(20, 0.4);
    in.factual = b.factual;
    in.covariates = b.covariates.storage();
    for (bool sim : {false, true}) {
        ad::Tape tape;
        const auto f = m.forward(tape, b, {});
        const auto l = est::training_losses(ad::sigmoid(f.q_logit), f.g_logit, f.s, in, 1.0, sim);
        const auto grads = tape.backward(l.total);
        double s_norm = 0.0;
        for (std::size_t i = 0; i < m.params().size(); ++i)
            if (m.params()[i].name.rfind("head.S", 0) == 0)
                for (double x : grads.of(f.params[i]).data()) s_norm += std::abs(x);
        if (sim) EXPECT_GT(s_norm, 0.0);
        else EXPECT_EQ(s_norm, 0.0);
    }
}

TEST(Policy, FixedPlansAndRules) {
    const auto tr = alternating_trajectory(4, 2);
    const auto cf3 = synth::TreatmentPlan::fixed("x", {1, 1, 0, 0});
    EXPECT_EQ(est::policy_actions(cf3, tr), (std::vector<int>{1, 1, 0, 0}));
    const auto rule = synth::plan_by_id("threshold:0:0", 4);
    EXPECT_EQ(est::policy_actions(rule, tr), (std::vector<int>{1, 0, 1, 0}));
}

TEST(Policy, ConstantPolicyMatchesAlwaysTreat) {
    const auto units = tiny_units(12, 3, 2, 4);
    const auto p = pointers(units);
    model::ModelConfig cfg;
    cfg.hidden = 8;
    cfg.covariate_dim = 2;
    cfg.tau = 3;
    auto m = model::NuisanceModel::init(cfg, 5);
    m.standardizer() = model::Standardizer::fit(p, 2);
    const auto always = synth::plan_by_id("always", 3), cf2 = synth::plan_by_id("CF2", 3);
    const auto e1 = est::evaluate_units(m, p, always), e2 = est::evaluate_units(m, p, cf2);
    EXPECT_EQ(e1.q_cf, e2.q_cf);
    EXPECT_EQ(e1.planned, e2.planned);
    std::vector<double> y;
    for (const auto& u : units) y.push_back(u.outcome);
    const auto w1 = est::compute_weights(e1, 0.01), w2 = est::compute_weights(e2, 0.01);
    EXPECT_EQ(w1.cum, w2.cum);
    EXPECT_EQ(est::sdr_targets(e1, w1, y, true).value, est::sdr_targets(e2, w2, y, true).value);
}

TEST(Estimate, ConstantModelPlugIn) {
    auto inst = longdr::testing::random_instance(15, 3, 12);
    inst.ev.q_cf.assign(inst.ev.q_cf.size(), 0.37);
    const auto r = est::estimate_from_eval(inst.ev, inst.y, est::EstimatorKind::plugin_ice, {}, -2.0, 3.0);
    EXPECT_NEAR(r.psi_scaled, 0.37, 1e-15);
    EXPECT_NEAR(r.psi_unscaled, -2.0 + 5.0 * 0.37, 1e-14);
}

TEST(Estimate, OffPlanFirstStepCollapsesRawSdrToPlugIn) {
    auto inst = longdr::testing::random_instance(25, 4, 13);
    for (std::size_t u = 0; u < 25; ++u) inst.ev.planned[inst.ev.idx(u, 0)] = 1 - inst.ev.factual[inst.ev.idx(u, 0)];
    const auto a = est::estimate_from_eval(inst.ev, inst.y, est::EstimatorKind::plugin_ice, {}, 0.0, 1.0);
    const auto b = est::estimate_from_eval(inst.ev, inst.y, est::EstimatorKind::raw_sdr, {}, 0.0, 1.0);
    EXPECT_EQ(a.psi_scaled, b.psi_scaled);
    EXPECT_EQ(a.q1, b.q1);
}

TEST(Estimate, UnscalingIsAffineForEveryKind) {
    const auto i1 = longdr::testing::random_instance(20, 3, 40);
    auto i2 = i1;
    for (auto& q : i2.ev.q_cf) q = std::min(0.95, q + 0.03);
    for (auto kind : {est::EstimatorKind::plugin_ice, est::EstimatorKind::raw_sdr, est::EstimatorKind::ltmle}) {
        const auto r1 = est::estimate_from_eval(i1.ev, i1.y, kind, {}, -2.8, 1.8);
        const auto r2 = est::estimate_from_eval(i2.ev, i2.y, kind, {}, -2.8, 1.8);
        EXPECT_NEAR(r1.psi_unscaled, -2.8 + 4.6 * r1.psi_scaled, 1e-14);
        EXPECT_NEAR(r1.psi_unscaled - r2.psi_unscaled, 4.6 * (r1.psi_scaled - r2.psi_scaled), 1e-13);
        EXPECT_GE(r1.se_plugin, 0.0);
        EXPECT_GE(r1.se_conditional, 0.0);
        EXPECT_EQ(r1.xi.size(), 3u);
    }
}

TEST(Estimate, ReportJsonRoundTrip) {
    const auto inst = longdr::testing::random_instance(20, 3, 41);
    auto r = est::estimate_from_eval(inst.ev, inst.y, est::EstimatorKind::ltmle, {}, -1.0, 1.0);
    r.plan_id = "CF3";
    r.config_hash = "abc123";
    r.seed = 99;
    const auto back = est::report_from_json(est::to_json(r));
    EXPECT_EQ(back.estimator, "ltmle");
    EXPECT_EQ(back.plan_id, "CF3");
    EXPECT_EQ(back.psi_scaled, r.psi_scaled);
    EXPECT_EQ(back.psi_unscaled, r.psi_unscaled);
    EXPECT_EQ(back.se_plugin, r.se_plugin);
    EXPECT_EQ(back.epsilons, r.epsilons);
    EXPECT_EQ(back.xi, r.xi);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_THROW(est::report_from_json("{\"estimator\": 1}"), ParseError);
    EXPECT_THROW(est::parse_estimator_kind("aipw"), ConfigError);
}

TEST(Train, ZeroEpochsReturnsInitialisation) {
    const auto units = tiny_units(20, 3, 2, 8);
    model::ModelConfig cfg;
    cfg.hidden = 8;
    cfg.covariate_dim = 2;
    cfg.tau = 3;
    est::TrainConfig tc;
    tc.epochs = 0;
    tc.seed = 17;
    const auto res = est::train(pointers(units), synth::plan_by_id("CF1", 3), cfg, tc);
    const auto init = model::NuisanceModel::init(cfg, 17);
    ASSERT_EQ(res.live.params().size(), init.params().size());
    for (std::size_t i = 0; i < init.params().size(); ++i)
        EXPECT_EQ(res.live.params()[i].value.storage(), init.params()[i].value.storage());
    EXPECT_TRUE(res.trace.epochs.empty());
}

TEST(Train, DeterministicAndLossDecreases) {
    const auto units = tiny_units(64, 3, 2, 10);
    model::ModelConfig cfg;
    cfg.hidden = 8;
    cfg.covariate_dim = 2;
    cfg.tau = 3;
    est::TrainConfig tc;
    tc.epochs = 30;
    tc.batch = 32;
    tc.learning_rate = 5e-3;
    tc.seed = 3;
    const auto plan = synth::plan_by_id("CF2", 3);
    const auto a = est::train(pointers(units), plan, cfg, tc);
    const auto b = est::train(pointers(units), plan, cfg, tc);
    ASSERT_EQ(a.trace.epochs.size(), 30u);
    EXPECT_TRUE(a.live == b.live);
    EXPECT_TRUE(a.target == b.target);
    EXPECT_LT(a.trace.epochs.back().loss, a.trace.epochs.front().loss);
    for (const auto& e : a.trace.epochs) {
        EXPECT_TRUE(std::isfinite(e.loss));
        EXPECT_EQ(e.xi.size(), 3u);
        EXPECT_NEAR(e.loss, e.loss_q + cfg.alpha * (e.loss_g + e.loss_s), 1e-12);
    }
    EXPECT_FALSE(a.live == a.target);
}
