#include "agripolicy/serialization.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "agripolicy/errors.hpp"

namespace agripolicy::io {

namespace {

constexpr std::string_view kInputsHeader =
    "my_label,soy_price_exw,meal_price_exw,oil_price_exw,soy_exports,meal_exports,oil_exports,"
    "soy_production,vat_rate,producer_export_share_vat,exemption_active";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (auto pos = line.find(','); pos != std::string_view::npos; pos = line.find(',', start)) {
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    out.push_back(trim(line.substr(start)));
    return out;
}

std::optional<double> to_real(std::string_view s) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v, std::chars_format::fixed);
    if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

ordered_json pair_json(std::pair<double, double> p) { return ordered_json{{"low", p.first}, {"high", p.second}}; }

}  // namespace

std::string csv_parameter_header(const std::map<std::string, std::string>& params) {
    std::string out;
    for (const auto& [k, v] : params) out += fmt::format("# {}={}\n", k, v);
    return out;
}

ordered_json to_json(const bsts::Interval& i) {
    return ordered_json{{"mean", i.mean}, {"lower", i.lower}, {"upper", i.upper}};
}

ordered_json to_json(const bsts::ImpactReport& r) {
    ordered_json j;
    j["actual_post_mean"] = r.actual_post_mean;
    j["counterfactual_post_mean"] = r.counterfactual_post_mean;
    j["counterfactual_ci"] = {{"lower", r.counterfactual_ci.lower}, {"upper", r.counterfactual_ci.upper}};
    j["average_effect"] = to_json(r.average_effect);
    j["average_effect_sd"] = r.average_effect_sd;
    j["cumulative_effect"] = to_json(r.cumulative_effect);
    j["draws_used"] = r.draws_used;
    auto weeks = ordered_json::array();
    for (std::size_t h = 0; h < r.pointwise_effects.size(); ++h) {
        ordered_json w;
        if (h < r.dates.size()) w["date"] = r.dates[h].to_string();
        w["actual"] = r.actual[h];
        w["predicted"] = to_json(r.pointwise_predictions[h]);
        w["effect"] = to_json(r.pointwise_effects[h]);
        weeks.push_back(std::move(w));
    }
    j["pointwise_effects"] = std::move(weeks);
    return j;
}

ordered_json to_json(const bsts::PosteriorDraws& d) {
    ordered_json j;
    j["draws"] = d.size();
    j["chains"] = d.chains;
    j["observation_variance"] = d.observation_variance;
    j["level_variance"] = d.level_variance;
    j["coefficients"] = d.coefficients;
    auto inclusion = ordered_json::array();
    for (const auto& row : d.inclusion) {
        auto r = ordered_json::array();
        for (bool b : row) r.push_back(b);
        inclusion.push_back(std::move(r));
    }
    j["inclusion"] = std::move(inclusion);
    j["level_path"] = d.level_path;
    j["demotion_counts"] = d.demotion_counts;
    j["warnings"] = d.warnings;
    return j;
}

std::string impact_plot_csv(const bsts::ImpactReport& r) {
    std::string out = "date,actual,predicted_mean,predicted_lower,predicted_upper,effect_mean\n";
    for (std::size_t h = 0; h < r.pointwise_effects.size(); ++h) {
        const auto& p = r.pointwise_predictions[h];
        out += fmt::format("{},{},{},{},{},{}\n", h < r.dates.size() ? r.dates[h].to_string() : std::to_string(h),
                           r.actual[h], p.mean, p.lower, p.upper, r.pointwise_effects[h].mean);
    }
    return out;
}

std::string gap_csv(const PriceSeries& internal, const PriceSeries& export_series) {
    const auto gap = price_gap_series(export_series, internal);
    std::string out = "date,internal,export,gap\n";
    for (const auto& o : gap.observations()) {
        out += fmt::format("{},{},{},{}\n", o.date.to_string(), *internal.at(o.date), *export_series.at(o.date),
                           o.price);
    }
    return out;
}

ordered_json to_json(const std::vector<BalanceValidation>& v) {
    auto rows = ordered_json::array();
    std::size_t passed = 0;
    std::size_t total = 0;
    for (const auto& b : v) {
        auto checks = ordered_json::array();
        for (const auto& c : b.checks) {
            checks.push_back({{"identity", c.name}, {"residual", c.residual}, {"passed", c.passed}});
            ++total;
            passed += c.passed ? 1 : 0;
        }
        rows.push_back({{"marketing_year", b.marketing_year},
                        {"commodity", std::string(to_string(b.commodity))},
                        {"checks", std::move(checks)}});
    }
    return ordered_json{{"identities_passed", passed}, {"identities_total", total}, {"rows", std::move(rows)}};
}

std::string balance_csv(const std::vector<BalanceValidation>& v) {
    std::string out = "marketing_year,commodity,identity,residual,passed\n";
    for (const auto& b : v) {
        for (const auto& c : b.checks) {
            out += fmt::format("{},{},{},{},{}\n", b.marketing_year, to_string(b.commodity), c.name, c.residual,
                               c.passed ? "true" : "false");
        }
    }
    return out;
}

std::vector<welfare::MarketingYearInputs> parse_marketing_year_csv(std::string_view text) {
    std::vector<welfare::MarketingYearInputs> out;
    std::size_t line_no = 0;
    bool first = true;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line.front() == '#') continue;
        if (first) {
            first = false;
            if (line.starts_with(kInputsHeader)) continue;
        }
        const auto f = split(line);
        if (f.size() != 11 && f.size() != 12) {
            throw RowError(line_no, fmt::format("expected 11 or 12 fields, found {}", f.size()));
        }
        welfare::MarketingYearInputs in;
        in.my_label = std::string(f[0]);
        if (in.my_label.empty()) throw RowError(line_no, "empty marketing-year label");
        double* targets[] = {&in.soy_price_exw, &in.meal_price_exw, &in.oil_price_exw, &in.soy_exports,
                             &in.meal_exports,  &in.oil_exports,    &in.soy_production, &in.vat_rate,
                             &in.producer_export_share_vat};
        for (std::size_t k = 0; k < std::size(targets); ++k) {
            const auto v = to_real(f[k + 1]);
            if (!v) throw RowError(line_no, fmt::format("malformed number '{}'", f[k + 1]));
            *targets[k] = *v;
        }
        if (f[10] == "true" || f[10] == "1") {
            in.exemption_active = true;
        } else if (f[10] == "false" || f[10] == "0") {
            in.exemption_active = false;
        } else {
            throw RowError(line_no, fmt::format("exemption_active must be true/false, got '{}'", f[10]));
        }
        if (f.size() == 12 && !f[11].empty()) {
            const auto v = to_real(f[11]);
            if (!v) throw RowError(line_no, fmt::format("malformed export price '{}'", f[11]));
            in.soy_price_export = *v;
        }
        try {
            in.validate();
        } catch (const InputError& e) {
            throw RowError(line_no, e.what());
        }
        out.push_back(std::move(in));
    }
    return out;
}

ordered_json to_json(const welfare::VatRefundReport& r) {
    auto rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json j;
        j["my_label"] = row.my_label;
        j["meal_soy_equiv"] = row.meal_soy_equiv;
        j["oil_soy_equiv"] = row.oil_soy_equiv;
        j["vat_oil_equiv"] = row.vat_oil_equiv;
        j["vat_soy"] = row.vat_soy;
        j["vat_soy_adjusted"] = row.vat_soy_adjusted ? ordered_json(*row.vat_soy_adjusted) : ordered_json(nullptr);
        j["vat_total"] = row.vat_total;
        j["price_index"] = row.price_index;
        j["production_index"] = row.production_index;
        j["vat_total_indexed"] = row.vat_total_indexed;
        j["meal_basis_used"] = row.meal_basis_used;
        rows.push_back(std::move(j));
    }
    return ordered_json{{"reference_year", r.reference_year},
                        {"price_index_basis", std::string(to_string(r.basis))},
                        {"rows", std::move(rows)}};
}

std::string vat_report_csv(const welfare::VatRefundReport& r) {
    std::string out = "cell,description";
    for (const auto& row : r.rows) out += "," + row.my_label;
    out += '\n';
    auto line = [&](std::string_view cell, std::string_view desc, auto get) {
        out += fmt::format("{},{}", cell, desc);
        for (const auto& row : r.rows) out += "," + get(row);
        out += '\n';
    };
    auto kusd = [](double v) { return fmt::format("{:.0f}", v); };
    auto tonnes = [](double v) { return fmt::format("{:.2f}", v); };
    line("b", "meal exports in soybean equivalent (kt)", [&](const auto& x) { return tonnes(x.meal_soy_equiv); });
    line("d", "oil exports in soybean equivalent (kt)", [&](const auto& x) { return tonnes(x.oil_soy_equiv); });
    line("e", "VAT refund on processed exports (kUSD)", [&](const auto& x) { return kusd(x.vat_oil_equiv); });
    line("h", "VAT refund on soybean exports (kUSD)", [&](const auto& x) { return kusd(x.vat_soy); });
    line("h1", "VAT refund on refundable share of soybean exports (kUSD)",
         [&](const auto& x) { return x.vat_soy_adjusted ? kusd(*x.vat_soy_adjusted) : std::string("--"); });
    line("i", "VAT refund total (kUSD)", [&](const auto& x) { return kusd(x.vat_total); });
    line("j", "soybean price index", [&](const auto& x) { return fmt::format("{:.2f}", x.price_index); });
    line("k", "soybean production index", [&](const auto& x) { return fmt::format("{:.2f}", x.production_index); });
    line("l", "VAT refund total indexed (kUSD)", [&](const auto& x) { return kusd(x.vat_total_indexed); });
    line("basis", "processed-export equivalent basis",
         [&](const auto& x) { return std::string(x.meal_basis_used ? "meal" : "oil"); });
    return out;
}

ordered_json to_json(const welfare::ValueAddedResult& r, const welfare::RevenueReconciliation* rec) {
    ordered_json j;
    j["soy_revenue"] = r.soy_revenue;
    j["oil_revenue"] = r.oil_revenue;
    j["meal_revenue"] = r.meal_revenue;
    j["margin"] = r.margin;
    j["break_even_cost"] = r.break_even_cost;
    j["range_verdict"] = std::string(to_string(r.range_verdict));
    if (rec) {
        ordered_json p;
        p["identity_margin"] = rec->published_identity_margin;
        p["identity_holds"] = rec->published_identity_holds;
        auto cells = ordered_json::array();
        for (const auto& c : rec->cells) {
            cells.push_back({{"cell", c.name}, {"published", c.published}, {"computed", c.computed},
                             {"discrepancy", c.discrepancy}});
        }
        p["cells"] = std::move(cells);
        j["published_cells"] = std::move(p);
    }
    return j;
}

std::string value_added_csv(const welfare::ValueAddedResult& r, const welfare::RevenueReconciliation* rec) {
    std::string out = "item,computed,published,discrepancy\n";
    auto published = [&](std::string_view name) -> const welfare::CellComparison* {
        if (!rec) return nullptr;
        for (const auto& c : rec->cells) {
            if (c.name == name) return &c;
        }
        return nullptr;
    };
    auto row = [&](std::string_view name, double v) {
        if (const auto* c = published(name)) {
            out += fmt::format("{},{:.2f},{:.2f},{}\n", name, v, c->published, c->discrepancy ? "true" : "false");
        } else {
            out += fmt::format("{},{:.2f},,\n", name, v);
        }
    };
    row("soy_revenue", r.soy_revenue);
    row("oil_revenue", r.oil_revenue);
    row("meal_revenue", r.meal_revenue);
    row("margin", r.margin);
    row("break_even_cost", r.break_even_cost);
    if (rec) {
        out += fmt::format("published_identity_margin,{:.2f},,{}\n", rec->published_identity_margin,
                           rec->published_identity_holds ? "false" : "true");
    }
    out += fmt::format("range_verdict,{},,\n", to_string(r.range_verdict));
    return out;
}

ordered_json to_json(const welfare::WelfareReport& r) {
    return ordered_json{{"gross_producer_loss", r.gross_producer_loss},
                        {"net_producer_loss", r.net_producer_loss},
                        {"processor_gain", r.processor_gain},
                        {"budget_gain_range", pair_json(r.budget_gain_range)},
                        {"net_welfare_range", pair_json(r.net_welfare_range)}};
}

std::string welfare_csv(const welfare::WelfareReport& r) {
    std::string out = "item,million_usd\n";
    out += fmt::format("gross_producer_loss,{:.2f}\n", r.gross_producer_loss);
    out += fmt::format("net_producer_loss,{:.2f}\n", r.net_producer_loss);
    out += fmt::format("processor_gain,{:.2f}\n", r.processor_gain);
    out += fmt::format("budget_gain_low,{:.2f}\n", r.budget_gain_range.first);
    out += fmt::format("budget_gain_high,{:.2f}\n", r.budget_gain_range.second);
    out += fmt::format("net_welfare_low,{:.2f}\n", r.net_welfare_range.first);
    out += fmt::format("net_welfare_high,{:.2f}\n", r.net_welfare_range.second);
    return out;
}

}  // namespace agripolicy::io
