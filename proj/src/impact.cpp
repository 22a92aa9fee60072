#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"

namespace agripolicy::bsts {

namespace {

constexpr std::uint64_t kPredictionStream = 0x70726564ULL;  // "pred"

double unscale(double z, const ColumnScale& s) {
    return static_cast<double>(static_cast<long double>(z) * s.sd + s.mean);
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

CounterfactualPaths predict_counterfactual(const PosteriorDraws& draws, const AlignedPanel& standardized,
                                           Rng& rng) {
    standardized.validate();
    if (!standardized.standardized) throw InputError("prediction requires a standardized panel");
    const Design design = build_design(standardized);
    const std::size_t n_cols = design.columns.size();
    const std::size_t start = standardized.intervention_index;
    const std::size_t horizon = standardized.post_length();

    std::normal_distribution<double> normal(0.0, 1.0);
    CounterfactualPaths out;
    out.paths.reserve(draws.size());
    std::vector<double> beta(n_cols);
    for (std::size_t d = 0; d < draws.size(); ++d) {
        if (draws.coefficients[d].size() != n_cols) throw InputError("draw coefficient count differs from panel");
        if (draws.level_path[d].empty()) throw InputError("draw has an empty level path");
        for (std::size_t j = 0; j < n_cols; ++j) {
            const double b = draws.coefficients[d][j];
            beta[j] = b == 0.0 ? 0.0 : design.signs[j] * b;
        }
        const double level_sd = std::sqrt(draws.level_variance[d]);
        const double obs_sd = std::sqrt(draws.observation_variance[d]);
        double mu = draws.level_path[d].back();
        std::vector<double> path(horizon);
        for (std::size_t h = 0; h < horizon; ++h) {
            mu += level_sd * normal(rng);
            const double y = mu + design.dot(start + h, beta) + obs_sd * normal(rng);
            path[h] = unscale(y, standardized.target_scale);
        }
        out.paths.push_back(std::move(path));
    }
    return out;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Interval summarize_draws(std::span<const double> values) {
    Interval out;
    out.mean = mean_of(values);
    std::vector<double> v(values.begin(), values.end());
    out.lower = std::min(quantile(v, 0.025), out.mean);
    out.upper = std::max(quantile(std::move(v), 0.975), out.mean);
    return out;
}

ImpactReport summarize_impact(std::span<const double> actual_post, const CounterfactualPaths& paths) {
    const std::size_t n_draws = paths.draws();
    if (n_draws < kMinSummaryDraws) {
        throw InputError(fmt::format("need at least {} counterfactual draws, got {}", kMinSummaryDraws, n_draws));
    }
    const std::size_t horizon = actual_post.size();
    if (horizon == 0) throw InputError("post period has no actual values");
    for (const auto& p : paths.paths) {
        if (p.size() != horizon) {
            throw InputError(fmt::format("counterfactual path length {} differs from {} actual weeks", p.size(), horizon));
        }
    }

    ImpactReport r;
    r.draws_used = n_draws;
    r.actual.assign(actual_post.begin(), actual_post.end());
    r.actual_post_mean = mean_of(actual_post);

    std::vector<double> column(n_draws);
    for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t d = 0; d < n_draws; ++d) column[d] = paths.paths[d][h];
        r.pointwise_predictions.push_back(summarize_draws(column));
        for (std::size_t d = 0; d < n_draws; ++d) column[d] = actual_post[h] - paths.paths[d][h];
        r.pointwise_effects.push_back(summarize_draws(column));
    }

    std::vector<double> cf_mean(n_draws);
    std::vector<double> avg(n_draws);
    std::vector<double> cum(n_draws);
    for (std::size_t d = 0; d < n_draws; ++d) {
        double pred = 0.0;
        double eff = 0.0;
        for (std::size_t h = 0; h < horizon; ++h) {
            pred += paths.paths[d][h];
            eff += actual_post[h] - paths.paths[d][h];
        }
        cf_mean[d] = pred / static_cast<double>(horizon);
        avg[d] = eff / static_cast<double>(horizon);
        cum[d] = eff;
    }
    r.counterfactual_ci = summarize_draws(cf_mean);
    r.counterfactual_post_mean = r.counterfactual_ci.mean;
    r.average_effect = summarize_draws(avg);
    r.cumulative_effect = summarize_draws(cum);

    double ss = 0.0;
    for (double a : avg) ss += (a - r.average_effect.mean) * (a - r.average_effect.mean);
    r.average_effect_sd = std::sqrt(ss / static_cast<double>(n_draws - 1));
    return r;
}

ImpactRun estimate_impact(const AlignedPanel& panel, const ModelSpec& spec, const SamplerConfig& cfg) {
    ImpactRun run;
    run.standardized = standardize_panel(panel);
    run.draws = fit(run.standardized, spec, cfg);
    Rng rng(derive_seed(cfg.seed, kPredictionStream, 0));
    auto paths = predict_counterfactual(run.draws, run.standardized, rng);

    const std::size_t start = panel.intervention_index;
    std::vector<double> actual;
    std::vector<Date> dates;
    std::vector<std::size_t> keep;
    for (std::size_t h = 0; h < panel.post_length(); ++h) {
        if (const auto& y = panel.target[start + h]) {
            actual.push_back(*y);
            dates.push_back(panel.grid[start + h]);
            keep.push_back(h);
        }
    }
    if (keep.size() != panel.post_length()) {
        for (auto& p : paths.paths) {
            std::vector<double> kept;
            kept.reserve(keep.size());
            for (auto h : keep) kept.push_back(p[h]);
            p = std::move(kept);
        }
    }
    run.report = summarize_impact(actual, paths);
    run.report.dates = std::move(dates);
    return run;
}

}  // namespace agripolicy::bsts
