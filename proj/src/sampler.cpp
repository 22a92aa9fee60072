#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"

namespace agripolicy::bsts {

namespace {

// Relative pivot below which an included submatrix counts as rank deficient.
constexpr double kRankTolerance = 1e-10;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Subsystem {
    Eigen::MatrixXd gram;
    Eigen::VectorXd cross;
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool singular = false;
};

Subsystem solve_subset(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, const std::vector<bool>& gamma) {
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        if (gamma[j]) idx.push_back(static_cast<Eigen::Index>(j));
    }
    Subsystem s;
    const auto q = static_cast<Eigen::Index>(idx.size());
    s.gram.resize(q, q);
    s.cross.resize(q);
    for (Eigen::Index a = 0; a < q; ++a) {
        s.cross(a) = xty(idx[a]);
        for (Eigen::Index b = 0; b < q; ++b) s.gram(a, b) = xtx(idx[a], idx[b]);
    }
    if (q == 0) return s;
    s.llt.compute(s.gram);
    if (s.llt.info() != Eigen::Success) {
        s.singular = true;
        return s;
    }
    const Eigen::MatrixXd l = s.llt.matrixL();
    for (Eigen::Index a = 0; a < q; ++a) {
        if (!(l(a, a) * l(a, a) > kRankTolerance * s.gram(a, a))) {
            s.singular = true;
            break;
        }
    }
    return s;
}

/// log p(response | gamma, obs_var) up to a gamma-free constant, under the
/// prior beta_gamma ~ N(0, obs_var * (n / g) * (X'X)^-1).
double log_marginal(const Subsystem& s, double shrink_c, double obs_var) {
    const auto q = s.gram.rows();
    if (q == 0) return 0.0;
    const Eigen::VectorXd w = s.llt.matrixL().solve(s.cross);
    const double quad = w.squaredNorm();
    return -0.5 * static_cast<double>(q) * std::log1p(shrink_c) +
           0.5 * (shrink_c / (1.0 + shrink_c)) * quad / obs_var;
}

void check_finite(double v, std::size_t draw, std::size_t chain, const char* what) {
    if (!std::isfinite(v)) {
        throw NumericalError(fmt::format("sampler diverged at draw {} (chain {}): non-finite {}", draw, chain, what));
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t counter) {
    return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ counter);
}

void ModelSpec::validate(std::size_t covariate_count) const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError(fmt::format("{} must be positive, got {}", name, v));
    };
    positive(observation_variance_prior.degrees_of_freedom, "observation variance prior degrees of freedom");
    positive(observation_variance_prior.scale_fraction, "observation variance prior scale fraction");
    positive(level_variance_prior.degrees_of_freedom, "level variance prior degrees of freedom");
    positive(level_variance_prior.scale_fraction, "level variance prior scale fraction");
    positive(expected_model_size, "expected model size");
    positive(coefficient_prior_information, "coefficient prior information");
    positive(initial_level_variance_multiplier, "initial level variance multiplier");
    if (covariate_count > 0 && expected_model_size > static_cast<double>(covariate_count)) {
        throw InputError(fmt::format("expected model size {} exceeds the {} covariates", expected_model_size,
                                     covariate_count));
    }
}

void SamplerConfig::validate() const {
    if (total_draws < 100) throw InputError(fmt::format("total draws must be at least 100, got {}", total_draws));
    if (burn_in >= total_draws) {
        throw InputError(fmt::format("burn-in {} must be below total draws {}", burn_in, total_draws));
    }
    if (chains == 0) throw InputError("chain count must be positive");
}

double draw_inverse_gamma(double shape, double rate, Rng& rng) {
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    return 1.0 / gamma(rng);
}

VarianceDraw draw_variances(std::span<const double> residuals, std::span<const double> innovations,
                            const ModelSpec& spec, Rng& rng, double target_sd) {
    auto draw = [&](std::span<const double> e, const VariancePrior& prior) {
        double ss = 0.0;
        for (double v : e) ss += v * v;
        const double guess = prior.scale_fraction * target_sd;
        const double prior_ss = prior.degrees_of_freedom * guess * guess;
        const double shape = 0.5 * (prior.degrees_of_freedom + static_cast<double>(e.size()));
        return draw_inverse_gamma(shape, 0.5 * (prior_ss + ss), rng);
    };
    VarianceDraw out;
    out.observation_variance = draw(residuals, spec.observation_variance_prior);
    out.level_variance = draw(innovations, spec.level_variance_prior);
    return out;
}

CoefficientDraw draw_coefficients(const RegressionData& data, double obs_var, const ModelSpec& spec,
                                  std::vector<bool> inclusion, Rng& rng) {
    const std::size_t n_cols = data.cols();
    CoefficientDraw out;
    out.beta.assign(n_cols, 0.0);
    if (n_cols == 0) return out;
    if (inclusion.size() != n_cols) throw InputError("inclusion vector length differs from covariate count");
    const auto rows = static_cast<Eigen::Index>(data.rows());
    const auto cols = static_cast<Eigen::Index>(n_cols);

    Eigen::MatrixXd x(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = data.columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    const Eigen::Map<const Eigen::VectorXd> y(data.response.data(), rows);
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::VectorXd xty = x.transpose() * y;

    const double prior_prob = std::min(1.0, spec.expected_model_size / static_cast<double>(n_cols));
    const double shrink_c = static_cast<double>(rows) / spec.coefficient_prior_information;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    for (std::size_t j = 0; j < n_cols; ++j) {
        inclusion[j] = true;
        const auto with = solve_subset(xtx, xty, inclusion);
        if (with.singular) {
            inclusion[j] = false;
            out.demoted.push_back(j);
            continue;
        }
        if (prior_prob >= 1.0) continue;
        inclusion[j] = false;
        const auto without = solve_subset(xtx, xty, inclusion);
        const double log_odds = std::log(prior_prob) - std::log1p(-prior_prob) +
                                log_marginal(with, shrink_c, obs_var) - log_marginal(without, shrink_c, obs_var);
        const double p = 1.0 / (1.0 + std::exp(-log_odds));
        inclusion[j] = uniform(rng) < p;
    }

    const auto s = solve_subset(xtx, xty, inclusion);
    if (s.gram.rows() > 0) {
        const double shrink = shrink_c / (1.0 + shrink_c);
        const Eigen::VectorXd mean = shrink * s.llt.solve(s.cross);
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd z(s.gram.rows());
        for (Eigen::Index a = 0; a < z.size(); ++a) z(a) = normal(rng);
        const Eigen::VectorXd noise = s.llt.matrixU().solve(z) * std::sqrt(obs_var * shrink);
        Eigen::Index a = 0;
        for (std::size_t j = 0; j < n_cols; ++j) {
            if (inclusion[j]) {
                out.beta[j] = mean(a) + noise(a);
                ++a;
            }
        }
    }
    out.inclusion = std::move(inclusion);
    return out;
}

RegressionData whitened_regression(const AlignedPanel& standardized, const Design& design, LevelPrior prior,
                                   double obs_var, double level_var) {
    const std::size_t pre = standardized.pre_length();
    const std::span<const std::optional<double>> y(standardized.target.data(), pre);
    const auto fy = filter_local_level(y, prior, obs_var, level_var);

    std::vector<double> weight;
    RegressionData r;
    for (std::size_t t = 0; t < pre; ++t) {
        if (!fy.observed[t]) continue;
        weight.push_back(std::sqrt(obs_var / fy.prediction_variance[t]));
        r.response.push_back(fy.prediction_error[t] * weight.back());
    }
    // A column's prediction errors do not depend on the level's prior mean
    // once it is subtracted from the target, so columns are filtered from 0.
    const LevelPrior centered{0.0, prior.variance};
    std::vector<std::optional<double>> x(pre);
    r.columns.resize(design.columns.size());
    for (std::size_t j = 0; j < design.columns.size(); ++j) {
        for (std::size_t t = 0; t < pre; ++t) {
            x[t] = y[t] ? std::optional<double>(design.columns[j][t]) : std::nullopt;
        }
        const auto fx = filter_local_level(x, centered, obs_var, level_var);
        r.columns[j].reserve(weight.size());
        std::size_t k = 0;
        for (std::size_t t = 0; t < pre; ++t) {
            if (fx.observed[t]) r.columns[j].push_back(fx.prediction_error[t] * weight[k++]);
        }
    }
    return r;
}

namespace {

struct ChainOutput {
    PosteriorDraws draws;
    std::vector<std::size_t> demotions;
};

ChainOutput run_chain(const AlignedPanel& panel, const Design& design, const ModelSpec& spec,
                      const SamplerConfig& cfg, std::size_t chain) {
    const std::size_t pre = panel.pre_length();
    const std::size_t n_cols = design.columns.size();

    std::optional<double> first;
    for (std::size_t t = 0; t < pre && !first; ++t) first = panel.target[t];
    const LevelPrior prior{*first, spec.initial_level_variance_multiplier};

    double obs_var = 0.5;
    double level_var = 0.01;
    std::vector<double> beta(n_cols, 0.0);
    std::vector<bool> inclusion(n_cols, false);

    ChainOutput out;
    out.demotions.assign(n_cols, 0);
    const std::size_t keep = cfg.retained_per_chain();
    out.draws.observation_variance.reserve(keep);
    out.draws.level_variance.reserve(keep);
    out.draws.coefficients.reserve(keep);
    out.draws.inclusion.reserve(keep);
    out.draws.level_path.reserve(keep);

    std::vector<std::optional<double>> z(pre);
    std::vector<double> residuals;
    std::vector<double> innovations(pre > 0 ? pre - 1 : 0);
    for (std::size_t draw = 0; draw < cfg.total_draws; ++draw) {
        Rng rng(derive_seed(cfg.seed, chain, draw));

        // Coefficients first, with the level integrated out, then the level
        // path given them, then the variances given both.
        auto coef = draw_coefficients(whitened_regression(panel, design, prior, obs_var, level_var), obs_var, spec,
                                      inclusion, rng);
        for (double b : coef.beta) check_finite(b, draw, chain, "regression coefficient");
        for (auto j : coef.demoted) ++out.demotions[j];
        beta = coef.beta;
        inclusion = coef.inclusion;

        for (std::size_t t = 0; t < pre; ++t) {
            z[t] = panel.target[t] ? std::optional<double>(*panel.target[t] - design.dot(t, beta)) : std::nullopt;
        }
        const auto filter = filter_local_level(z, prior, obs_var, level_var);
        auto mu = sample_level_path(filter, level_var, rng);
        for (double v : mu) check_finite(v, draw, chain, "level path");

        residuals.clear();
        for (std::size_t t = 0; t < pre; ++t) {
            if (z[t]) residuals.push_back(*z[t] - mu[t]);
        }
        for (std::size_t t = 0; t + 1 < pre; ++t) innovations[t] = mu[t + 1] - mu[t];
        const auto var = draw_variances(residuals, innovations, spec, rng);
        check_finite(var.observation_variance, draw, chain, "observation variance");
        check_finite(var.level_variance, draw, chain, "level variance");
        if (!(var.observation_variance > 0.0) || !(var.level_variance > 0.0)) {
            throw NumericalError(fmt::format("sampler diverged at draw {} (chain {}): variance underflow", draw, chain));
        }
        obs_var = var.observation_variance;
        level_var = var.level_variance;

        if (draw < cfg.burn_in) continue;
        std::vector<double> oriented(n_cols);
        for (std::size_t j = 0; j < n_cols; ++j) oriented[j] = beta[j] == 0.0 ? 0.0 : design.signs[j] * beta[j];
        out.draws.observation_variance.push_back(obs_var);
        out.draws.level_variance.push_back(level_var);
        out.draws.coefficients.push_back(std::move(oriented));
        out.draws.inclusion.push_back(inclusion);
        out.draws.level_path.push_back(std::move(mu));
    }
    return out;
}

}  // namespace

PosteriorDraws fit(const AlignedPanel& standardized, const ModelSpec& spec, const SamplerConfig& cfg) {
    standardized.validate();
    if (!standardized.standardized) throw InputError("fit requires a standardized panel");
    cfg.validate();
    spec.validate(standardized.covariate_count());
    const std::size_t pre = standardized.pre_length();
    const auto observed = static_cast<std::size_t>(std::count_if(
        standardized.target.begin(), standardized.target.begin() + static_cast<long>(pre),
        [](const auto& v) { return v.has_value(); }));
    if (pre < kMinPrePeriodWeeks || observed < kMinPrePeriodWeeks) {
        throw InputError(fmt::format("pre-period has {} observed weeks, need at least {}", observed,
                                     kMinPrePeriodWeeks));
    }

    const Design design = build_design(standardized);
    std::vector<ChainOutput> chains(cfg.chains);
    if (cfg.chains == 1) {
        chains[0] = run_chain(standardized, design, spec, cfg, 0);
    } else {
        std::vector<std::exception_ptr> errors(cfg.chains);
        std::vector<std::thread> workers;
        for (std::size_t c = 0; c < cfg.chains; ++c) {
            workers.emplace_back([&, c] {
                try {
                    chains[c] = run_chain(standardized, design, spec, cfg, c);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    PosteriorDraws merged;
    merged.chains = cfg.chains;
    merged.demotion_counts.assign(standardized.covariate_count(), 0);
    merged.sweeps = cfg.total_draws * cfg.chains;
    for (auto& c : chains) {
        auto& d = c.draws;
        auto append = [](auto& dst, auto& src) {
            dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
        };
        append(merged.observation_variance, d.observation_variance);
        append(merged.level_variance, d.level_variance);
        append(merged.coefficients, d.coefficients);
        append(merged.inclusion, d.inclusion);
        append(merged.level_path, d.level_path);
        for (std::size_t j = 0; j < c.demotions.size(); ++j) merged.demotion_counts[j] += c.demotions[j];
    }
    for (std::size_t j = 0; j < merged.demotion_counts.size(); ++j) {
        if (2 * merged.demotion_counts[j] > merged.sweeps) {
            merged.warnings.push_back(fmt::format("covariate {} was excluded as rank deficient in {} of {} sweeps",
                                                  standardized.covariate_ids[j], merged.demotion_counts[j],
                                                  merged.sweeps));
        }
    }
    return merged;
}

}  // namespace agripolicy::bsts
