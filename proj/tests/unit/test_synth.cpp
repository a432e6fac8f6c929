#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "longdr/common/errors.hpp"
#include "longdr/synth/dataset_io.hpp"
#include "longdr/synth/dgp.hpp"
#include "longdr/synth/oracle.hpp"
#include "longdr/synth/plans.hpp"
#include "longdr/synth/toy.hpp"
#include "synth/simulator.hpp"

using namespace longdr;
using namespace longdr::synth;

namespace {

DgpConfig small_config(Variant v = Variant::limited, std::size_t tau = 10, std::size_t n = 200) {
    DgpConfig c;
    c.variant = v;
    c.tau = tau;
    c.n = n;
    c.n_test = n / 4;
    c.seed = 17;
    return c;
}

} // namespace

TEST(Dgp, InitialIntensity) {
    EXPECT_DOUBLE_EQ(initial_intensity(15), 4.5);
    EXPECT_DOUBLE_EQ(initial_intensity(10), 2.0);
}

TEST(Dgp, LatentStepWithoutTreatmentOrSignalIsPureDecay) {
    DgpConfig c;
    c.variant = Variant::expanded;
    const std::vector<double> z{1.0, -2.0, 0.5, 0.0, 3.0};
    const auto next = latent_step(c, z, 0, 0.0, std::vector<double>(5, 0.0));
    for (std::size_t j = 0; j < z.size(); ++j) EXPECT_DOUBLE_EQ(next[j], 0.37 * z[j]);
}

TEST(Dgp, LagCoefficientRules) {
    const auto s = lag_coefficients(4, CoefficientRule::shifted);
    EXPECT_DOUBLE_EQ(s[0], -1.0 / 2.0);
    EXPECT_DOUBLE_EQ(s[1], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(s[3], 1.0 / 5.0);
    const auto p = lag_coefficients(4, CoefficientRule::paper_singular);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_DOUBLE_EQ(p[1], -1.0);
    EXPECT_DOUBLE_EQ(p[2], 0.5);
    EXPECT_DOUBLE_EQ(p[3], -1.0 / 3.0);
}

TEST(Dgp, ConfigValidation) {
    DgpConfig c;
    c.tau = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = DgpConfig{};
    c.lag = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = DgpConfig{};
    c.noise_std_ay = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = DgpConfig{};
    c.n = 10;
    c.n_test = 10;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Dgp, SameSeedIsBitIdentical) {
    for (auto v : {Variant::limited, Variant::expanded}) {
        const auto a = simulate(small_config(v));
        const auto b = simulate(small_config(v));
        EXPECT_EQ(a, b);
    }
    auto other = small_config();
    other.seed = 18;
    EXPECT_NE(simulate(small_config()).trajectories, simulate(other).trajectories);
}

TEST(Dgp, ShapesSplitsAndScaling) {
    for (auto v : {Variant::limited, Variant::expanded}) {
        const auto cfg = small_config(v);
        const auto ds = simulate(cfg);
        ds.validate();
        EXPECT_EQ(ds.d, v == Variant::limited ? 11u : 16u);
        EXPECT_EQ(ds.select(Split::train).size(), 150u);
        EXPECT_EQ(ds.select(Split::test).size(), 50u);
        std::set<std::size_t> ids;
        double lo = 1.0, hi = 0.0;
        for (const auto& tr : ds.trajectories) {
            EXPECT_TRUE(ids.insert(tr.id).second);
            EXPECT_GE(tr.outcome, 0.0);
            EXPECT_LE(tr.outcome, 1.0);
            if (tr.split == Split::train) {
                lo = std::min(lo, tr.outcome);
                hi = std::max(hi, tr.outcome);
            }
            // L_1 carries no earlier outcome.
            EXPECT_EQ(tr.covariates[0].back(), 0.0);
        }
        EXPECT_EQ(lo, 0.0);
        EXPECT_EQ(hi, 1.0);
        EXPECT_LT(ds.y_min, ds.y_max);
    }
}

TEST(Dgp, IntermediateOutcomeMovesIntoNextCovariateRow) {
    // Replaying the same stream up to step t+1 exposes Y_t in L_{t+1}; the
    // terminal outcome is the raw Y_tau, whose scaled value is stored.
    const auto cfg = small_config();
    const auto ds = simulate(cfg);
    const auto coeffs = lag_coefficients(cfg.lag, cfg.coefficient_rule);
    auto rng = detail::unit_stream(cfg.seed, 3, detail::StreamTag::dataset);
    const auto draw = detail::simulate_unit(cfg, coeffs, rng, nullptr);
    EXPECT_EQ(draw.covariates, ds.trajectories[3].covariates);
    EXPECT_DOUBLE_EQ(ds.scale(draw.outcome), ds.trajectories[3].outcome);
}

TEST(Dgp, UnscaleInvertsScaleInsideTrainRange) {
    const auto ds = simulate(small_config());
    for (double raw : {ds.y_min, ds.y_max, 0.5 * (ds.y_min + ds.y_max), ds.y_min + 1e-3}) {
        EXPECT_NEAR(ds.unscale(ds.scale(raw)), raw, 1e-14 * (ds.y_max - ds.y_min));
    }
    EXPECT_EQ(ds.unscale(ds.scale(ds.y_min)), ds.y_min);
    EXPECT_EQ(ds.unscale(ds.scale(ds.y_max)), ds.y_max);
}

TEST(Dgp, AnalyticPropensityMatchesTreatmentFrequency) {
    auto cfg = small_config(Variant::expanded, 10, 2000);
    const auto coeffs = lag_coefficients(cfg.lag, cfg.coefficient_rule);
    double sum_p = 0.0, sum_a = 0.0, var = 0.0;
    for (std::size_t u = 0; u < cfg.n; ++u) {
        auto rng = detail::unit_stream(cfg.seed, u, detail::StreamTag::dataset);
        const auto draw = detail::simulate_unit(cfg, coeffs, rng, nullptr);
        for (std::size_t t = 0; t < cfg.tau; ++t) {
            sum_p += draw.propensity[t];
            sum_a += draw.actions[t];
            var += draw.propensity[t] * (1.0 - draw.propensity[t]);
        }
    }
    EXPECT_LT(std::abs(sum_a - sum_p), 4.0 * std::sqrt(var));
}

TEST(Dgp, PositivityIsReported) {
    const auto cfg = small_config();
    const auto rep = positivity_report(cfg);
    EXPECT_EQ(rep.pairs, cfg.n * cfg.tau);
    EXPECT_GT(rep.min_propensity, 0.0);
    EXPECT_LT(rep.max_propensity, 1.0);
    const auto strict = positivity_report(cfg, 0.0, 1.0);
    EXPECT_EQ(strict.inside, strict.pairs);
    EXPECT_LE(rep.inside, rep.pairs);
}

TEST(Plans, StandardSequences) {
    const auto p10 = standard_plans(10);
    ASSERT_EQ(p10.size(), 4u);
    EXPECT_EQ(p10[0].sequence, std::vector<int>(10, 0));
    EXPECT_EQ(p10[1].sequence, std::vector<int>(10, 1));
    EXPECT_EQ(p10[2].sequence, (std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}));
    EXPECT_EQ(p10[3].sequence, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));

    const auto p20 = standard_plans(20);
    for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(p20[3].sequence[t], t < 10 ? 0 : 1);
    for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(p20[2].sequence[t], t < 10 ? 1 : 0);

    const auto p15 = standard_plans(15);
    for (std::size_t t = 0; t < 15; ++t) EXPECT_EQ(p15[2].sequence[t], t < 10 ? 1 : 0);
    for (std::size_t t = 0; t < 15; ++t) EXPECT_EQ(p15[3].sequence[t], t < 5 ? 0 : 1);
    const auto p15l = standard_plans(15, Cf4Reading::literal);
    for (std::size_t t = 0; t < 15; ++t) EXPECT_EQ(p15l[3].sequence[t], t < 10 ? 0 : 1);

    EXPECT_EQ(standard_plans(5)[2].sequence, (std::vector<int>{1, 1, 1, 0, 0}));
    EXPECT_EQ(standard_plans(5)[3].sequence, (std::vector<int>{0, 0, 1, 1, 1}));
    EXPECT_EQ(standard_plans(3)[2].sequence, (std::vector<int>{1, 1, 0}));
    EXPECT_EQ(standard_plans(3)[3].sequence, (std::vector<int>{0, 1, 1}));
    // Other horizons split at ceil(tau / 2).
    EXPECT_EQ(standard_plans(7)[2].sequence, (std::vector<int>{1, 1, 1, 1, 0, 0, 0}));
    EXPECT_EQ(standard_plans(7)[3].sequence, (std::vector<int>{0, 0, 0, 0, 1, 1, 1}));
}

TEST(Plans, ThresholdRuleReadsCurrentCovariate) {
    const auto plan = plan_by_id("threshold:0:0", 4);
    std::vector<std::vector<double>> cov;
    for (int t = 1; t <= 4; ++t) cov.push_back({t % 2 == 0 ? 1.0 : -1.0, 0.0});
    std::vector<int> got;
    for (std::size_t t = 0; t < 4; ++t) got.push_back(plan.action(cov, {}, t));
    EXPECT_EQ(got, (std::vector<int>{0, 1, 0, 1}));
    EXPECT_THROW(plan_by_id("CF9", 4), ConfigError);
    EXPECT_THROW(standard_plans(10)[0].validate(9), ContractError);
}

TEST(Oracle, ForcingTheNaturalCourseReplaysTheUnit) {
    for (auto v : {Variant::limited, Variant::expanded}) {
        const auto cfg = small_config(v);
        const auto coeffs = lag_coefficients(cfg.lag, cfg.coefficient_rule);
        for (std::size_t u = 0; u < 25; ++u) {
            auto r1 = detail::unit_stream(5, u, detail::StreamTag::oracle);
            const auto natural = detail::simulate_unit(cfg, coeffs, r1, nullptr);
            const auto plan = TreatmentPlan::fixed("natural", natural.actions);
            auto r2 = detail::unit_stream(5, u, detail::StreamTag::oracle);
            const auto forced = detail::simulate_unit(cfg, coeffs, r2, &plan);
            EXPECT_EQ(forced.covariates, natural.covariates);
            EXPECT_EQ(forced.outcome, natural.outcome);
        }
    }
}

TEST(Oracle, StandardErrorShrinksLikeRootN) {
    const auto cfg = small_config();
    const auto plan = standard_plans(10)[1];
    const auto a = ground_truth_capo(cfg, plan, 4000, 1);
    const auto b = ground_truth_capo(cfg, plan, 8000, 1);
    const double ratio = b.se / a.se;
    EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
    EXPECT_LT(std::abs(a.mean - b.mean), 4.0 * a.se);
}

TEST(Oracle, StructuralNullMakesPlansAgree) {
    auto cfg = small_config();
    cfg.outcome_ignores_treatment = true;
    const auto plans = standard_plans(10);
    const auto never = ground_truth_capo(cfg, plans[0], 4000, 2);
    const auto always = ground_truth_capo(cfg, plans[1], 4000, 2);
    EXPECT_LE(std::abs(never.mean - always.mean), 3.0 * std::hypot(never.se, always.se));
}

TEST(Oracle, PlansDifferWhenTreatmentMatters) {
    const auto cfg = small_config();
    const auto plans = standard_plans(10);
    const auto never = ground_truth_capo(cfg, plans[0], 20000, 2);
    const auto always = ground_truth_capo(cfg, plans[1], 20000, 2);
    EXPECT_GT(std::abs(never.mean - always.mean), 5.0 * std::hypot(never.se, always.se));
}

TEST(Oracle, CacheRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "longdr_oracle_cache_test";
    std::filesystem::remove_all(dir);
    const auto cfg = small_config();
    const auto plan = standard_plans(10)[2];
    const auto fresh = cached_ground_truth(cfg, plan, 2000, 4, dir.string());
    EXPECT_FALSE(std::filesystem::is_empty(dir));
    auto other_seed = cfg;
    other_seed.seed = 99; // dataset seed is not part of the structural equations
    const auto hit = cached_ground_truth(other_seed, plan, 2000, 4, dir.string());
    EXPECT_EQ(fresh.mean, hit.mean);
    EXPECT_EQ(fresh.se, hit.se);
    std::filesystem::remove_all(dir);
}

TEST(DatasetIo, RoundTripIsExact) {
    for (auto v : {Variant::limited, Variant::expanded}) {
        const auto ds = simulate(small_config(v, 5, 40));
        std::stringstream ss;
        write_dataset(ss, ds);
        EXPECT_EQ(read_dataset(ss), ds);
    }
}

TEST(DatasetIo, EmptyDatasetKeepsHeader) {
    Dataset ds;
    ds.tau = 3;
    ds.d = 2;
    ds.y_min = -1.25;
    ds.y_max = 0.1;
    ds.seed = 9;
    std::stringstream ss;
    write_dataset(ss, ds);
    const auto back = read_dataset(ss);
    EXPECT_EQ(back, ds);
    EXPECT_TRUE(back.trajectories.empty());
}

TEST(DatasetIo, BadActionNamesTheField) {
    std::stringstream ss;
    ss << R"({"tau":2,"d":1,"y_min":0,"y_max":1,"seed":0,"variant":"toy"})" << '\n'
       << R"({"id":0,"split":"train","L":[[0.5],[1.5]],"A":[0,1],"Y":0.5})" << '\n'
       << R"({"id":1,"split":"train","L":[[0.5],[1.5]],"A":[0,2],"Y":0.5})" << '\n';
    try {
        read_dataset(ss);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.where(), "line 3, field A[1]");
    }
}

TEST(DatasetIo, MalformedInputsLocateTheProblem) {
    const std::string header = R"({"tau":2,"d":1,"y_min":0,"y_max":1,"seed":0,"variant":"toy"})";
    auto where = [](const std::string& text) {
        std::stringstream ss(text);
        try {
            read_dataset(ss);
        } catch (const ParseError& e) {
            return e.where();
        }
        return std::string("no error");
    };
    EXPECT_EQ(where(header + "\n{\"id\":0,\"L\":[[1],[2]],\"A\":[0,1]}\n"), "line 2, field Y");
    EXPECT_EQ(where(header + "\n{\"id\":0,\"L\":[[1]],\"A\":[0,1],\"Y\":1}\n"), "line 2, field L");
    EXPECT_EQ(where(header + "\n{\"id\":0,\"L\":[[1],[\"x\"]],\"A\":[0,1],\"Y\":1}\n"),
              "line 2, field L[1][0]");
    EXPECT_EQ(where(header + "\n{not json\n"), "line 2");
    EXPECT_EQ(where(""), "line 1");
}

TEST(Toy, PropensitiesAndQuadratureAgreeWithSampling) {
    const ToyParams p;
    const auto ds = simulate_toy(p, 20000, 3);
    double a1 = 0.0, g1 = 0.0;
    for (const auto& tr : ds.trajectories) {
        a1 += tr.actions[0];
        g1 += toy_propensity(p, tr, 0);
    }
    EXPECT_NEAR(a1 / 20000.0, g1 / 20000.0, 0.015);

    // E[Q_1(a_1, L_1)] by averaging the quadrature over sampled L_1 matches
    // the nested quadrature truth.
    const std::array<int, 2> plan{1, 0};
    double q = 0.0;
    for (const auto& tr : ds.trajectories) q += toy_q(p, plan, tr, 0, plan[0]);
    EXPECT_NEAR(q / 20000.0, toy_truth(p, plan), 0.01);

    // Among units that followed the plan, mean Y estimates the truth after
    // inverse weighting.
    double ipw = 0.0;
    for (const auto& tr : ds.trajectories) {
        if (tr.actions[0] != plan[0] || tr.actions[1] != plan[1]) continue;
        const double w1 = 1.0 / toy_propensity(p, tr, 0);
        const double w2 = 1.0 / (1.0 - toy_propensity(p, tr, 1));
        ipw += w1 * w2 * tr.outcome;
    }
    EXPECT_NEAR(ipw / 20000.0, toy_truth(p, plan), 0.03);
}
