#include <cmath>

#include <fmt/format.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"

namespace agripolicy::bsts {

namespace {

template <typename Range, typename Get>
ColumnScale pre_moments(const Range& values, std::size_t pre, Get get, const std::string& name) {
    long double sum = 0.0L;
    std::size_t n = 0;
    for (std::size_t t = 0; t < pre; ++t) {
        if (auto v = get(values[t])) {
            sum += *v;
            ++n;
        }
    }
    if (n < 2) throw InputError(fmt::format("column {} has fewer than two pre-period values", name));
    const long double mean = sum / static_cast<long double>(n);
    long double ss = 0.0L;
    for (std::size_t t = 0; t < pre; ++t) {
        if (auto v = get(values[t])) ss += (*v - mean) * (*v - mean);
    }
    const long double sd = std::sqrt(ss / static_cast<long double>(n - 1));
    if (!(sd > 0.0L) || !std::isfinite(static_cast<double>(sd))) {
        throw InputError(fmt::format("column {} has zero variance on the pre-period", name));
    }
    return {static_cast<double>(mean), static_cast<double>(sd)};
}

double scale(double v, const ColumnScale& s) {
    return static_cast<double>((static_cast<long double>(v) - s.mean) / s.sd);
}

double unscale(double z, const ColumnScale& s) {
    return static_cast<double>(static_cast<long double>(z) * s.sd + s.mean);
}

}  // namespace

AlignedPanel standardize_panel(const AlignedPanel& panel) {
    panel.validate();
    if (panel.standardized) throw InputError("panel is already standardized");
    AlignedPanel out = panel;
    const std::size_t pre = panel.pre_length();

    out.target_scale = pre_moments(panel.target, pre, [](const std::optional<double>& v) { return v; },
                                   panel.target_id);
    for (auto& v : out.target) {
        if (v) v = scale(*v, out.target_scale);
    }
    out.covariate_scales.clear();
    for (std::size_t j = 0; j < panel.covariate_count(); ++j) {
        const auto s = pre_moments(panel.covariates[j], pre, [](double v) { return std::optional<double>(v); },
                                   panel.covariate_ids[j]);
        out.covariate_scales.push_back(s);
        for (auto& v : out.covariates[j]) v = scale(v, s);
    }
    out.standardized = true;
    return out;
}

AlignedPanel destandardize_panel(const AlignedPanel& panel) {
    if (!panel.standardized) throw InputError("panel is not standardized");
    AlignedPanel out = panel;
    for (auto& v : out.target) {
        if (v) v = unscale(*v, panel.target_scale);
    }
    for (std::size_t j = 0; j < panel.covariate_count(); ++j) {
        for (auto& v : out.covariates[j]) v = unscale(v, panel.covariate_scales[j]);
    }
    out.standardized = false;
    out.target_scale = {};
    out.covariate_scales.clear();
    return out;
}

double Design::dot(std::size_t t, std::span<const double> beta) const {
    double s = 0.0;
    for (std::size_t j = 0; j < columns.size(); ++j) s += columns[j][t] * beta[j];
    return s;
}

Design build_design(const AlignedPanel& standardized) {
    if (!standardized.standardized) throw InputError("design requires a standardized panel");
    Design d;
    d.rows = standardized.size();
    for (const auto& col : standardized.covariates) {
        std::vector<double> q(col.size());
        for (std::size_t t = 0; t < col.size(); ++t) q[t] = std::round(col[t] / kDesignQuantum) * kDesignQuantum;
        double sign = 1.0;
        for (std::size_t t = 0; t < standardized.pre_length(); ++t) {
            if (std::abs(q[t]) >= 0.5) {
                sign = q[t] > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        if (sign < 0.0) {
            for (auto& v : q) v = -v + 0.0;  // no negative zeros
        }
        d.columns.push_back(std::move(q));
        d.signs.push_back(sign);
    }
    return d;
}

}  // namespace agripolicy::bsts
