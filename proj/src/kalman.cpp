#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"

namespace agripolicy::bsts {

FilterResult filter_local_level(std::span<const std::optional<double>> z, LevelPrior prior, double obs_var,
                                double level_var) {
    if (!(obs_var > 0.0) || !std::isfinite(obs_var)) {
        throw InputError(fmt::format("observation variance must be positive, got {}", obs_var));
    }
    if (!(level_var >= 0.0) || !std::isfinite(level_var)) {
        throw InputError(fmt::format("level variance must be non-negative, got {}", level_var));
    }
    if (!(prior.variance > 0.0)) throw InputError("initial level variance must be positive");

    const std::size_t n = z.size();
    FilterResult f;
    f.predicted_mean.resize(n);
    f.predicted_variance.resize(n);
    f.filtered_mean.resize(n);
    f.filtered_variance.resize(n);
    f.prediction_error.resize(n);
    f.prediction_variance.resize(n);
    f.observed.resize(n);
    f.level_variance = level_var;

    double a = prior.mean;
    double p = prior.variance;
    constexpr double log_2pi = 1.8378770664093454836;
    for (std::size_t t = 0; t < n; ++t) {
        f.predicted_mean[t] = a;
        f.predicted_variance[t] = p;
        const double fv = p + obs_var;
        f.prediction_variance[t] = fv;
        if (z[t]) {
            const double v = *z[t] - a;
            const double gain = p / fv;
            f.prediction_error[t] = v;
            f.filtered_mean[t] = a + gain * v;
            f.filtered_variance[t] = p * obs_var / fv;
            f.observed[t] = true;
            f.log_likelihood += -0.5 * (log_2pi + std::log(fv) + v * v / fv);
        } else {
            f.prediction_error[t] = std::numeric_limits<double>::quiet_NaN();
            f.filtered_mean[t] = a;
            f.filtered_variance[t] = p;
            f.observed[t] = false;
        }
        a = f.filtered_mean[t];
        p = f.filtered_variance[t] + level_var;
    }
    return f;
}

FilterResult kalman_filter(const AlignedPanel& panel, double obs_var, double level_var,
                           std::span<const double> beta, const ModelSpec& spec) {
    panel.validate();
    if (beta.size() != panel.covariate_count()) {
        throw InputError(fmt::format("expected {} coefficients, got {}", panel.covariate_count(), beta.size()));
    }
    const std::size_t pre = panel.pre_length();
    std::vector<std::optional<double>> z(pre);
    std::optional<double> first;
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < pre; ++t) {
        if (!panel.target[t]) continue;
        const double y = *panel.target[t];
        if (!first) first = y;
        sum += y;
        sumsq += y * y;
        ++n;
        double xb = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) xb += panel.covariates[j][t] * beta[j];
        z[t] = y - xb;
    }
    if (n < 2) throw InputError("pre-period needs at least two observed target values");
    const double mean = sum / static_cast<double>(n);
    const double var = (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
    const LevelPrior prior{*first, spec.initial_level_variance_multiplier * var};
    return filter_local_level(z, prior, obs_var, level_var);
}

SmoothResult smooth_level(const FilterResult& f) {
    const std::size_t n = f.size();
    SmoothResult s{std::vector<double>(n), std::vector<double>(n)};
    if (n == 0) return s;
    s.mean[n - 1] = f.filtered_mean[n - 1];
    s.variance[n - 1] = f.filtered_variance[n - 1];
    for (std::size_t t = n - 1; t-- > 0;) {
        const double p_next = f.predicted_variance[t + 1];
        const double gain = f.filtered_variance[t] / p_next;
        s.mean[t] = f.filtered_mean[t] + gain * (s.mean[t + 1] - f.predicted_mean[t + 1]);
        s.variance[t] = f.filtered_variance[t] + gain * gain * (s.variance[t + 1] - p_next);
    }
    return s;
}

std::vector<double> sample_level_path(const FilterResult& f, double level_var, Rng& rng) {
    const std::size_t n = f.size();
    std::vector<double> mu(n);
    if (n == 0) return mu;
    std::normal_distribution<double> normal(0.0, 1.0);
    mu[n - 1] = f.filtered_mean[n - 1] + std::sqrt(f.filtered_variance[n - 1]) * normal(rng);
    for (std::size_t t = n - 1; t-- > 0;) {
        const double c = f.filtered_variance[t];
        const double p_next = c + level_var;
        const double gain = c / p_next;
        const double mean = f.filtered_mean[t] + gain * (mu[t + 1] - f.filtered_mean[t]);
        const double var = c * level_var / p_next;
        mu[t] = mean + std::sqrt(var) * normal(rng);
    }
    return mu;
}

}  // namespace agripolicy::bsts
