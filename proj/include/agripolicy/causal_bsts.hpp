#pragma once

// Local-level-plus-regression structural time-series model used to estimate
// the effect of an intervention on a price series.
//
// In standardized units the model is
//
//   y_t     = mu_t + x_t' beta + eps_t,     eps_t ~ N(0, obs_var)
//   mu_{t+1} = mu_t + eta_t,                eta_t ~ N(0, level_var)
//   mu_1    ~ N(first observed y, kappa * Var(y_pre))
//
// with a spike-and-slab prior on beta. The model is fit on the weeks before
// the intervention by Gibbs sampling; the retained draws are propagated over
// the post-intervention weeks to form counterfactual price paths.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agripolicy/date.hpp"
#include "agripolicy/market_data.hpp"

namespace agripolicy::bsts {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer over (root, stream, counter). Every random stream in
/// the sampler is seeded through this so that chain c, iteration i always
/// sees the same numbers regardless of how many chains run or in what order.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t counter);

inline constexpr std::uint64_t kDefaultSeed = 20180901;

struct VariancePrior {
    double degrees_of_freedom = 0.01;
    double scale_fraction = 0.1;  // prior guess for the sd, as a fraction of sd(y_pre)
};

struct ModelSpec {
    VariancePrior observation_variance_prior{0.01, 0.1};
    VariancePrior level_variance_prior{0.01, 0.01};
    double expected_model_size = 2.0;
    double coefficient_prior_information = 1.0;  // g
    double initial_level_variance_multiplier = 1e6;  // kappa

    /// Throws InputError unless every field is positive and the expected
    /// model size does not exceed `covariate_count` (when it is nonzero).
    void validate(std::size_t covariate_count) const;
};

struct SamplerConfig {
    std::size_t total_draws = 2000;
    std::size_t burn_in = 500;
    std::uint64_t seed = kDefaultSeed;
    std::size_t chains = 1;

    void validate() const;
    std::size_t retained_per_chain() const { return total_draws - burn_in; }
};

// ---------------------------------------------------------------------------
// Standardization

/// Rescales target and covariates to mean 0, sd 1 using pre-period moments
/// only. Throws InputError on a zero-variance column.
AlignedPanel standardize_panel(const AlignedPanel& panel);

/// Undoes standardize_panel using the stored metadata.
AlignedPanel destandardize_panel(const AlignedPanel& panel);

/// Grid spacing applied to standardized covariates when the design matrix is
/// built. Rounding to a fixed dyadic grid makes the design, and everything
/// downstream of it, exactly invariant to affine rescaling of a covariate.
inline constexpr double kDesignQuantum = 1.0 / (1 << 20);

/// Column-major design over all grid weeks. Each column is snapped to
/// kDesignQuantum and sign-normalized so that its first pre-period entry
/// with magnitude >= 0.5 is positive; `signs[j]` records the flip.
struct Design {
    std::vector<std::vector<double>> columns;
    std::vector<double> signs;
    std::size_t rows = 0;

    double dot(std::size_t t, std::span<const double> beta) const;
};

Design build_design(const AlignedPanel& standardized);

// ---------------------------------------------------------------------------
// Kalman filtering and smoothing of the local level

struct LevelPrior {
    double mean = 0.0;
    double variance = 1e6;
};

struct FilterResult {
    std::vector<double> predicted_mean;      // a_t = E[mu_t | z_1..z_{t-1}]
    std::vector<double> predicted_variance;  // P_t
    std::vector<double> filtered_mean;       // m_t = E[mu_t | z_1..z_t]
    std::vector<double> filtered_variance;   // C_t
    std::vector<double> prediction_error;    // v_t, NaN where z_t is missing
    std::vector<double> prediction_variance; // F_t = P_t + obs_var
    std::vector<bool> observed;
    double log_likelihood = 0.0;
    double level_variance = 0.0;

    std::size_t size() const { return filtered_mean.size(); }
};

/// Exact Gaussian filtering of z_t = mu_t + eps_t. Missing points take the
/// prediction step only. Throws InputError on non-positive variances.
FilterResult filter_local_level(std::span<const std::optional<double>> z, LevelPrior prior,
                                double obs_var, double level_var);

/// Filters the pre-period of a standardized panel after removing x_t' beta.
FilterResult kalman_filter(const AlignedPanel& panel, double obs_var, double level_var,
                           std::span<const double> beta, const ModelSpec& spec = {});

struct SmoothResult {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Rauch-Tung-Striebel smoother over a filter pass.
SmoothResult smooth_level(const FilterResult& filter);

/// One exact draw of mu_1..mu_T given the data (forward filtering, backward
/// sampling).
std::vector<double> sample_level_path(const FilterResult& filter, double level_var, Rng& rng);

// ---------------------------------------------------------------------------
// Conditional draws

struct VarianceDraw {
    double observation_variance = 0.0;
    double level_variance = 0.0;
};

/// Conjugate inverse-gamma updates. With prior (nu, f) the prior sum of
/// squares is nu * (f * target_sd)^2.
VarianceDraw draw_variances(std::span<const double> residuals, std::span<const double> innovations,
                            const ModelSpec& spec, Rng& rng, double target_sd = 1.0);

/// Draw from InverseGamma(shape, rate).
double draw_inverse_gamma(double shape, double rate, Rng& rng);

struct CoefficientDraw {
    std::vector<double> beta;
    std::vector<bool> inclusion;
    std::vector<std::size_t> demoted;  // columns excluded for rank deficiency this sweep
};

/// Regression rows restricted to the weeks used for the coefficient update.
struct RegressionData {
    std::vector<std::vector<double>> columns;  // columns[j][i]
    std::vector<double> response;

    std::size_t rows() const { return response.size(); }
    std::size_t cols() const { return columns.size(); }
};

/// One systematic-scan Gibbs sweep over the inclusion indicators followed by
/// a draw of the included coefficients, all conditional on obs_var. Excluded
/// coefficients are exactly zero.
CoefficientDraw draw_coefficients(const RegressionData& data, double obs_var, const ModelSpec& spec,
                                  std::vector<bool> inclusion, Rng& rng);

/// Pre-period regression with the local level integrated out. The target and
/// every design column are run through the same Kalman filter; each observed
/// week contributes its one-step prediction errors scaled by
/// sqrt(obs_var / F_t), so the rows carry homoscedastic noise of variance
/// obs_var and least squares on them is exact generalized least squares.
RegressionData whitened_regression(const AlignedPanel& standardized, const Design& design, LevelPrior prior,
                                   double obs_var, double level_var);

// ---------------------------------------------------------------------------
// Fitting

struct PosteriorDraws {
    std::vector<double> observation_variance;
    std::vector<double> level_variance;
    std::vector<std::vector<double>> coefficients;  // in the panel's column orientation
    std::vector<std::vector<bool>> inclusion;
    std::vector<std::vector<double>> level_path;     // pre-period, standardized units

    std::size_t chains = 1;
    std::vector<std::size_t> demotion_counts;  // per covariate, summed over sweeps
    std::size_t sweeps = 0;
    std::vector<std::string> warnings;

    std::size_t size() const { return observation_variance.size(); }
};

/// Blocked Gibbs sampler. Each iteration draws the coefficients with the
/// level integrated out, then the level path given them, then both variances.
/// Expects a standardized panel. Any non-finite quantity raises NumericalError naming
/// the draw index. Deterministic given cfg.seed.
PosteriorDraws fit(const AlignedPanel& standardized, const ModelSpec& spec, const SamplerConfig& cfg);

// ---------------------------------------------------------------------------
// Prediction and summary

/// paths[d][h] is draw d's counterfactual for post week h, in USD/t.
struct CounterfactualPaths {
    std::vector<std::vector<double>> paths;
    std::size_t draws() const { return paths.size(); }
    std::size_t horizon() const { return paths.empty() ? 0 : paths.front().size(); }
};

CounterfactualPaths predict_counterfactual(const PosteriorDraws& draws, const AlignedPanel& standardized,
                                           Rng& rng);

struct Interval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Type-7 (linear interpolation) empirical quantile, p in [0, 1].
double quantile(std::vector<double> values, double p);

/// Mean with the 2.5% / 97.5% quantiles. The bounds are widened to include
/// the mean if a heavily skewed sample would otherwise put it outside.
Interval summarize_draws(std::span<const double> values);

inline constexpr std::size_t kMinSummaryDraws = 100;

struct ImpactReport {
    double actual_post_mean = 0.0;
    double counterfactual_post_mean = 0.0;
    Interval counterfactual_ci;            // of the post-period mean counterfactual
    std::vector<Interval> pointwise_predictions;
    std::vector<Interval> pointwise_effects;
    Interval average_effect;
    double average_effect_sd = 0.0;        // posterior sd of the average effect
    Interval cumulative_effect;
    std::size_t draws_used = 0;
    std::vector<double> actual;            // post-period actuals used
    std::vector<Date> dates;               // filled by estimate_impact
};

/// Effects are actual - predicted per draw; intervals are empirical
/// 2.5%/97.5% quantiles across draws. Throws InputError on fewer than
/// kMinSummaryDraws draws or a path/actual length mismatch.
ImpactReport summarize_impact(std::span<const double> actual_post, const CounterfactualPaths& paths);

struct ImpactRun {
    AlignedPanel standardized;
    PosteriorDraws draws;
    ImpactReport report;
};

/// standardize -> fit -> predict -> summarize. Post-period weeks with a
/// missing target are left out of the summary.
ImpactRun estimate_impact(const AlignedPanel& panel, const ModelSpec& spec, const SamplerConfig& cfg);

}  // namespace agripolicy::bsts
