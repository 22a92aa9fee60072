#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"
#include "synthetic.hpp"

using namespace agripolicy;
using namespace agripolicy::bsts;

namespace {

CounterfactualPaths constant_paths(std::size_t draws, const std::vector<double>& path) {
    CounterfactualPaths p;
    p.paths.assign(draws, path);
    return p;
}

void expect_ordered(const Interval& i) {
    EXPECT_LE(i.lower, i.mean);
    EXPECT_LE(i.mean, i.upper);
}

// Sorted-index quantile written independently of the library's.
double oracle_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const double below = std::floor(pos);
    const double frac = pos - below;
    const auto k = static_cast<std::size_t>(below);
    return k + 1 < v.size() ? (1.0 - frac) * v[k] + frac * v[k + 1] : v[k];
}

}  // namespace

TEST(QuantileTest, Type7Examples) {
    EXPECT_EQ(quantile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
    EXPECT_EQ(quantile({5.0}, 0.975), 5.0);
    EXPECT_DOUBLE_EQ(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile({10.0, 0.0}, 0.975), 9.75);
    EXPECT_THROW(quantile({}, 0.5), InputError);
}

TEST(SummarizeImpactTest, IdenticalDrawsGiveZeroEffects) {
    const std::vector<double> actual{287.0, 290.0, 284.0};
    const auto r = summarize_impact(actual, constant_paths(200, actual));
    EXPECT_EQ(r.average_effect.mean, 0.0);
    EXPECT_EQ(r.average_effect.lower, 0.0);
    EXPECT_EQ(r.average_effect.upper, 0.0);
    EXPECT_EQ(r.cumulative_effect.mean, 0.0);
    for (const auto& e : r.pointwise_effects) {
        EXPECT_EQ(e.lower, 0.0);
        EXPECT_EQ(e.upper, 0.0);
    }
}

TEST(SummarizeImpactTest, ConstantShift) {
    const std::vector<double> actual{287.0, 290.0, 284.0, 300.0};
    std::vector<double> shifted = actual;
    for (auto& v : shifted) v += 29.0;
    const auto r = summarize_impact(actual, constant_paths(100, shifted));
    EXPECT_EQ(r.average_effect.mean, -29.0);
    EXPECT_EQ(r.cumulative_effect.mean, -116.0);
    EXPECT_EQ(r.counterfactual_post_mean - r.actual_post_mean, 29.0);
}

TEST(SummarizeImpactTest, QuantileOracleOnNormalDraws) {
    Rng rng(316);
    std::normal_distribution<double> normal(316.0, 6.0);
    CounterfactualPaths paths;
    const std::size_t weeks = 4;
    for (int d = 0; d < 10000; ++d) {
        std::vector<double> p(weeks);
        for (auto& v : p) v = normal(rng);
        paths.paths.push_back(std::move(p));
    }
    const std::vector<double> actual(weeks, 287.0);
    const auto r = summarize_impact(actual, paths);

    std::vector<double> avg;
    for (const auto& p : paths.paths) {
        double e = 0.0;
        for (double v : p) e += 287.0 - v;
        avg.push_back(e / weeks);
    }
    const double direct_mean = std::accumulate(avg.begin(), avg.end(), 0.0) / static_cast<double>(avg.size());
    EXPECT_NEAR(r.average_effect.mean, direct_mean, 1e-9);
    EXPECT_NEAR(r.average_effect.mean, -29.0, 0.2);
    EXPECT_NEAR(r.average_effect.lower, oracle_quantile(avg, 0.025), 1e-9);
    EXPECT_NEAR(r.average_effect.upper, oracle_quantile(avg, 0.975), 1e-9);
    EXPECT_NEAR(r.average_effect.mean, r.actual_post_mean - r.counterfactual_post_mean, 1e-9);

    for (std::size_t h = 0; h < weeks; ++h) {
        std::vector<double> col;
        for (const auto& p : paths.paths) col.push_back(p[h]);
        EXPECT_NEAR(r.pointwise_predictions[h].lower, oracle_quantile(col, 0.025), 1e-9);
        EXPECT_NEAR(r.pointwise_predictions[h].upper, oracle_quantile(col, 0.975), 1e-9);
    }
}

TEST(SummarizeImpactTest, Errors) {
    const std::vector<double> actual{1.0, 2.0};
    EXPECT_THROW(summarize_impact(actual, constant_paths(99, actual)), InputError);
    EXPECT_THROW(summarize_impact(actual, constant_paths(100, {1.0, 2.0, 3.0})), InputError);
    EXPECT_THROW(summarize_impact({}, constant_paths(100, {})), InputError);
}

TEST(SummarizeImpactTest, IntervalsAreOrderedOnSkewedDraws) {
    Rng rng(8);
    std::lognormal_distribution<double> skew(0.0, 2.5);
    for (int trial = 0; trial < 20; ++trial) {
        CounterfactualPaths paths;
        for (int d = 0; d < 100; ++d) paths.paths.push_back({skew(rng), skew(rng), skew(rng)});
        const auto r = summarize_impact(std::vector<double>{1.0, 1.0, 1.0}, paths);
        expect_ordered(r.average_effect);
        expect_ordered(r.cumulative_effect);
        expect_ordered(r.counterfactual_ci);
        for (const auto& i : r.pointwise_effects) expect_ordered(i);
        for (const auto& i : r.pointwise_predictions) expect_ordered(i);
    }
}

TEST(PredictTest, NoiselessPropagation) {
    fixtures::SyntheticSpec gen;
    gen.pre_weeks = 30;
    gen.post_weeks = 5;
    gen.covariates = 2;
    gen.beta = {0.5, 0.2};
    const auto s = standardize_panel(fixtures::make_synthetic_panel(gen, 3).panel);
    const auto design = build_design(s);

    PosteriorDraws draws;
    const std::vector<double> beta{0.7, -0.2};
    for (int d = 0; d < 3; ++d) {
        draws.observation_variance.push_back(0.0);
        draws.level_variance.push_back(0.0);
        draws.coefficients.push_back(beta);
        draws.inclusion.push_back({true, true});
        draws.level_path.push_back(std::vector<double>(s.pre_length(), 0.25 * d));
    }
    Rng rng(1);
    const auto paths = predict_counterfactual(draws, s, rng);
    ASSERT_EQ(paths.draws(), 3u);
    ASSERT_EQ(paths.horizon(), 5u);
    for (int d = 0; d < 3; ++d) {
        for (std::size_t h = 0; h < 5; ++h) {
            const std::size_t t = s.intervention_index + h;
            double xb = 0.0;
            for (std::size_t j = 0; j < 2; ++j) xb += design.signs[j] * design.columns[j][t] * beta[j];
            const double expected = (0.25 * d + xb) * s.target_scale.sd + s.target_scale.mean;
            EXPECT_NEAR(paths.paths[d][h], expected, 1e-9);
        }
    }
}

TEST(PredictTest, SeededPathsAreReproducible) {
    fixtures::SyntheticSpec gen;
    gen.pre_weeks = 40;
    gen.post_weeks = 6;
    const auto s = standardize_panel(fixtures::make_synthetic_panel(gen, 4).panel);
    const auto draws = fit(s, {}, {200, 50, 6, 1});
    Rng a(10);
    Rng b(10);
    EXPECT_EQ(predict_counterfactual(draws, s, a).paths, predict_counterfactual(draws, s, b).paths);
}

TEST(EstimateImpactTest, RecoversInjectedEffect) {
    fixtures::SyntheticSpec gen;
    const auto syn = fixtures::make_synthetic_panel(gen, 2018);
    const auto run = estimate_impact(syn.panel, {}, {});
    const auto& e = run.report.average_effect;
    EXPECT_NEAR(e.mean, -29.0, 3.0 * run.report.average_effect_sd);
    EXPECT_NEAR(run.report.actual_post_mean, 287.0, 1e-9);
    EXPECT_EQ(run.report.dates.size(), gen.post_weeks);
    EXPECT_EQ(run.report.draws_used, 1500u);
}

TEST(EstimateImpactTest, ExactCovariateTracking) {
    // y = x pre-period (tiny noise), actual post = x - 29.
    fixtures::SyntheticSpec gen;
    gen.covariates = 1;
    gen.beta = {1.0};
    gen.level_sd = 0.0;
    gen.noise_sd = 0.01;
    const auto syn = fixtures::make_synthetic_panel(gen, 7);
    ModelSpec spec;
    spec.expected_model_size = 1.0;
    const auto run = estimate_impact(syn.panel, spec, {});
    EXPECT_NEAR(run.report.average_effect.mean, -29.0, std::max(3.0 * run.report.average_effect_sd, 0.05));
}

TEST(EstimateImpactTest, DeterministicAndMissingPostWeeksAreSkipped) {
    fixtures::SyntheticSpec gen;
    gen.pre_weeks = 50;
    gen.post_weeks = 8;
    auto panel = fixtures::make_synthetic_panel(gen, 9).panel;
    panel.target[52].reset();
    const SamplerConfig cfg{300, 100, 12, 1};
    const auto a = estimate_impact(panel, {}, cfg);
    const auto b = estimate_impact(panel, {}, cfg);
    EXPECT_EQ(a.report.actual, b.report.actual);
    EXPECT_EQ(a.report.average_effect.mean, b.report.average_effect.mean);
    EXPECT_EQ(a.report.average_effect.lower, b.report.average_effect.lower);
    EXPECT_EQ(a.report.actual.size(), 7u);
    EXPECT_EQ(a.report.dates.size(), 7u);
    EXPECT_EQ(std::count(a.report.dates.begin(), a.report.dates.end(), panel.grid[52]), 0);
}
