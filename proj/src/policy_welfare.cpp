#include "agripolicy/policy_welfare.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "agripolicy/errors.hpp"

namespace agripolicy::welfare {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(what);
}

bool fraction(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void CrushYields::validate() const {
    require(oil_yield > 0.0 && oil_yield < 1.0, fmt::format("oil yield {} outside (0, 1)", oil_yield));
    require(meal_yield > 0.0 && meal_yield < 1.0, fmt::format("meal yield {} outside (0, 1)", meal_yield));
    require(oil_yield + meal_yield <= 1.0, "oil and meal yields sum above 1");
}

void MarketingYearInputs::validate() const {
    const auto where = my_label.empty() ? std::string("marketing year") : my_label;
    require(soy_price_exw > 0.0 && meal_price_exw > 0.0 && oil_price_exw > 0.0,
            where + ": prices must be positive");
    require(soy_exports >= 0.0 && meal_exports >= 0.0 && oil_exports >= 0.0 && soy_production >= 0.0,
            where + ": volumes must be non-negative");
    require(fraction(vat_rate), where + ": VAT rate outside [0, 1]");
    require(fraction(producer_export_share_vat), where + ": producer export share outside [0, 1]");
    require(!soy_price_export || *soy_price_export > 0.0, where + ": export price must be positive");
}

double soybean_equivalent(double export_volume, double yield) {
    if (!(yield > 0.0)) throw InputError(fmt::format("crush yield must be positive, got {}", yield));
    return export_volume / yield;
}

double vat_refund(double volume_soy_equiv, double soy_price, double vat_rate) {
    return volume_soy_equiv * soy_price * vat_rate;
}

VatRefundRow vat_refund_row(const MarketingYearInputs& in, const CrushYields& yields, bool exemption_active) {
    in.validate();
    yields.validate();
    VatRefundRow row;
    row.my_label = in.my_label;
    row.meal_soy_equiv = soybean_equivalent(in.meal_exports, yields.meal_yield);
    row.oil_soy_equiv = soybean_equivalent(in.oil_exports, yields.oil_yield);
    row.meal_basis_used = row.meal_soy_equiv > row.oil_soy_equiv;
    const double processed = row.meal_basis_used ? row.meal_soy_equiv : row.oil_soy_equiv;
    row.vat_oil_equiv = vat_refund(processed, in.soy_price_exw, in.vat_rate);
    row.vat_soy = vat_refund(in.soy_exports, in.soy_price_exw, in.vat_rate);
    if (exemption_active) row.vat_soy_adjusted = row.vat_soy * in.producer_export_share_vat;
    row.vat_total = row.vat_oil_equiv + row.vat_soy_adjusted.value_or(row.vat_soy);
    row.vat_total_indexed = row.vat_total;
    return row;
}

double indexed_refund(double vat_total, double price_base, double price_ref, double prod_base, double prod_ref) {
    if (!(price_ref > 0.0) || !(prod_ref > 0.0) || !(price_base > 0.0) || !(prod_base > 0.0)) {
        throw InputError("price and production index inputs must be positive");
    }
    return vat_total / (price_base / price_ref) / (prod_base / prod_ref);
}

std::optional<PriceIndexBasis> parse_price_index_basis(std::string_view text) {
    if (text == "internal") return PriceIndexBasis::internal;
    if (text == "export") return PriceIndexBasis::export_price;
    return std::nullopt;
}

std::string_view to_string(PriceIndexBasis basis) {
    return basis == PriceIndexBasis::internal ? "internal" : "export";
}

VatRefundReport vat_refund_report(const std::vector<MarketingYearInputs>& inputs, const CrushYields& yields,
                                  std::optional<std::string> reference_year, PriceIndexBasis basis) {
    if (inputs.empty()) throw InputError("no marketing-year inputs");
    const auto ref_label = reference_year.value_or(inputs.back().my_label);
    const auto ref = std::find_if(inputs.begin(), inputs.end(),
                                  [&](const auto& in) { return in.my_label == ref_label; });
    if (ref == inputs.end()) throw InputError("reference marketing year " + ref_label + " not among inputs");

    auto index_price = [&](const MarketingYearInputs& in) {
        if (basis == PriceIndexBasis::internal) return in.soy_price_exw;
        if (!in.soy_price_export) throw InputError(in.my_label + ": export price required for the export index basis");
        return *in.soy_price_export;
    };

    VatRefundReport report{{}, ref_label, basis};
    const double price_ref = index_price(*ref);
    for (const auto& in : inputs) {
        auto row = vat_refund_row(in, yields, in.exemption_active);
        const double price = index_price(in);
        row.price_index = price / price_ref;
        row.production_index = in.soy_production / ref->soy_production;
        row.vat_total_indexed = indexed_refund(row.vat_total, price, price_ref, in.soy_production, ref->soy_production);
        report.rows.push_back(std::move(row));
    }
    return report;
}

void ValueAddedInputs::validate() const {
    require(soy_export_price > 0.0 && oil_export_price > 0.0 && meal_export_price > 0.0,
            "export prices must be positive");
    yields.validate();
    require(processing_cost_range.first <= processing_cost_range.second, "processing cost range low exceeds high");
}

std::string_view to_string(CostVerdict v) {
    switch (v) {
        case CostVerdict::value_adding: return "value_adding";
        case CostVerdict::break_even: return "break_even";
        case CostVerdict::value_destroying: return "value_destroying";
        case CostVerdict::mixed: return "mixed";
    }
    return "mixed";
}

CostVerdict classify_processing_cost(const ValueAddedResult& result, double cost) {
    if (cost < result.margin) return CostVerdict::value_adding;
    if (cost == result.margin) return CostVerdict::break_even;
    return CostVerdict::value_destroying;
}

ValueAddedResult value_added_margin(const ValueAddedInputs& in) {
    in.validate();
    ValueAddedResult r;
    r.soy_revenue = in.soy_export_price;
    r.oil_revenue = in.oil_export_price * in.yields.oil_yield;
    r.meal_revenue = in.meal_export_price * in.yields.meal_yield;
    r.margin = r.oil_revenue + r.meal_revenue - r.soy_revenue;
    r.break_even_cost = r.margin;
    const auto low = classify_processing_cost(r, in.processing_cost_range.first);
    const auto high = classify_processing_cost(r, in.processing_cost_range.second);
    r.range_verdict = low == high ? low : CostVerdict::mixed;
    return r;
}

bool RevenueReconciliation::any_discrepancy() const {
    return !published_identity_holds ||
           std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.discrepancy; });
}

RevenueReconciliation reconcile_revenue_cells(const ValueAddedInputs& inputs, const RevenueCells& published,
                                              double tolerance) {
    const auto computed = value_added_margin(inputs);
    RevenueReconciliation r;
    r.published_identity_margin = published.oil_revenue + published.meal_revenue - published.soy_revenue;
    r.published_identity_holds = std::abs(r.published_identity_margin - published.margin) <= 1e-9;
    auto compare = [&](std::string name, double pub, double calc) {
        r.cells.push_back({std::move(name), pub, calc, std::abs(pub - calc) > tolerance});
    };
    compare("soy_revenue", published.soy_revenue, computed.soy_revenue);
    compare("oil_revenue", published.oil_revenue, computed.oil_revenue);
    compare("meal_revenue", published.meal_revenue, computed.meal_revenue);
    compare("margin", published.margin, computed.margin);
    return r;
}

void WelfareAssumptions::validate() const {
    require(price_effect >= 0.0 && std::isfinite(price_effect), "price effect must be non-negative");
    require(production > 0.0, "production must be positive");
    require(fraction(exporter_share), "exporter share outside [0, 1]");
    require(processed_volume >= 0.0, "processed volume must be non-negative");
    require(budget_gain_range.first >= 0.0 && budget_gain_range.first <= budget_gain_range.second,
            "budget gain range must satisfy 0 <= low <= high");
}

ProducerLoss producer_loss(const WelfareAssumptions& a) {
    a.validate();
    const double gross = a.production * a.price_effect / 1e6;
    return {gross, gross * (1.0 - a.exporter_share)};
}

double processor_gain(double processed_volume, double price_effect) {
    if (processed_volume < 0.0 || price_effect < 0.0) throw InputError("processor gain inputs must be non-negative");
    return processed_volume * price_effect / 1e6;
}

std::pair<double, double> net_welfare(double net_producer_loss, double gain, std::pair<double, double> budget) {
    if (budget.first > budget.second) throw InputError("budget gain range low exceeds high");
    const double base = net_producer_loss - gain;
    return {base - budget.second, base - budget.first};
}

WelfareReport welfare_report(const WelfareAssumptions& a) {
    const auto loss = producer_loss(a);
    WelfareReport r;
    r.gross_producer_loss = loss.gross;
    r.net_producer_loss = loss.net;
    r.processor_gain = processor_gain(a.processed_volume, a.price_effect);
    r.budget_gain_range = a.budget_gain_range;
    r.net_welfare_range = net_welfare(loss.net, r.processor_gain, a.budget_gain_range);
    return r;
}

}  // namespace agripolicy::welfare
