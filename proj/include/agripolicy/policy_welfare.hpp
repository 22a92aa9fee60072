#pragma once

// VAT-refund accounting for soybean exports and the welfare split of an
// implicit export tax between producers, processors and the budget.
//
// Units: volumes in thousand tonnes unless stated, prices in USD/t excluding
// VAT, refund amounts in thousand USD, welfare figures in million USD.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agripolicy::welfare {

struct CrushYields {
    double oil_yield = 0.18;
    double meal_yield = 0.80;

    void validate() const;
};

struct MarketingYearInputs {
    std::string my_label;
    double soy_price_exw = 0.0;   // f
    double meal_price_exw = 0.0;
    double oil_price_exw = 0.0;
    double soy_exports = 0.0;     // g
    double meal_exports = 0.0;    // a
    double oil_exports = 0.0;     // c
    double soy_production = 0.0;
    double vat_rate = 0.2;
    double producer_export_share_vat = 0.5;
    bool exemption_active = false;
    std::optional<double> soy_price_export;  // only needed for the export price-index basis

    void validate() const;
};

struct VatRefundRow {
    std::string my_label;
    double meal_soy_equiv = 0.0;      // b = a / meal_yield
    double oil_soy_equiv = 0.0;       // d = c / oil_yield
    double vat_oil_equiv = 0.0;       // e = d * f * rate (or from b, see meal_basis_used)
    double vat_soy = 0.0;             // h = g * f * rate
    std::optional<double> vat_soy_adjusted;  // h1 = h * producer share, exemption years only
    double vat_total = 0.0;           // i = e + (h1 or h)
    double price_index = 1.0;         // j
    double production_index = 1.0;   // k
    double vat_total_indexed = 0.0;   // l = i / j / k
    /// Processed exports are converted to soybeans through the larger of the
    /// two equivalents. Normally that is oil; set when meal exceeded it.
    bool meal_basis_used = false;
};

/// export_volume / yield. Throws InputError on a non-positive yield.
double soybean_equivalent(double export_volume, double yield);

/// volume * price * rate.
double vat_refund(double volume_soy_equiv, double soy_price, double vat_rate);

/// Per-year refund cells. Indices are left at 1 (l = i); use vat_refund_report
/// to index against a reference year.
VatRefundRow vat_refund_row(const MarketingYearInputs& inputs, const CrushYields& yields, bool exemption_active);

/// vat_total / (price_base / price_ref) / (prod_base / prod_ref).
double indexed_refund(double vat_total, double price_base, double price_ref, double prod_base, double prod_ref);

enum class PriceIndexBasis { internal, export_price };

std::optional<PriceIndexBasis> parse_price_index_basis(std::string_view text);
std::string_view to_string(PriceIndexBasis basis);

struct VatRefundReport {
    std::vector<VatRefundRow> rows;
    std::string reference_year;
    PriceIndexBasis basis = PriceIndexBasis::internal;
};

/// Computes every row and indexes it against `reference_year` (defaults to
/// the last row). Each row's exemption flag comes from its inputs.
VatRefundReport vat_refund_report(const std::vector<MarketingYearInputs>& inputs, const CrushYields& yields,
                                  std::optional<std::string> reference_year = std::nullopt,
                                  PriceIndexBasis basis = PriceIndexBasis::internal);

// ---------------------------------------------------------------------------
// Crush value added

struct ValueAddedInputs {
    double soy_export_price = 0.0;
    double oil_export_price = 0.0;
    double meal_export_price = 0.0;
    CrushYields yields;
    std::pair<double, double> processing_cost_range{30.0, 60.0};

    void validate() const;
};

enum class CostVerdict { value_adding, break_even, value_destroying, mixed };

std::string_view to_string(CostVerdict v);

struct ValueAddedResult {
    double soy_revenue = 0.0;
    double oil_revenue = 0.0;
    double meal_revenue = 0.0;
    double margin = 0.0;
    double break_even_cost = 0.0;
    CostVerdict range_verdict = CostVerdict::mixed;
};

/// Revenue per tonne of soybeans exported raw versus crushed.
ValueAddedResult value_added_margin(const ValueAddedInputs& inputs);

/// Processing below the margin adds value, above destroys it, exactly at the
/// margin breaks even.
CostVerdict classify_processing_cost(const ValueAddedResult& result, double cost);

/// Revenue cells as printed in a published crush table.
struct RevenueCells {
    double soy_revenue = 0.0;
    double oil_revenue = 0.0;
    double meal_revenue = 0.0;
    double margin = 0.0;
};

struct CellComparison {
    std::string name;
    double published = 0.0;
    double computed = 0.0;
    bool discrepancy = false;
};

struct RevenueReconciliation {
    double published_identity_margin = 0.0;  // oil + meal - soy, from the printed cells
    bool published_identity_holds = false;
    std::vector<CellComparison> cells;
    bool any_discrepancy() const;
};

inline constexpr double kRevenueCellTolerance = 0.05;

/// Checks the printed cells against their own margin identity and against
/// the formula values from `inputs`. Mismatches are flagged, not corrected.
RevenueReconciliation reconcile_revenue_cells(const ValueAddedInputs& inputs, const RevenueCells& published,
                                              double tolerance = kRevenueCellTolerance);

// ---------------------------------------------------------------------------
// Welfare

/// 2018 soybean harvest in tonnes, consistent with a 118 M USD gross loss at
/// 26 USD/t. The commonly quoted 4.5 Mt is this figure rounded.
inline constexpr double kDefaultProductionTonnes = 118.0e6 / 26.0;

struct WelfareAssumptions {
    double price_effect = 26.0;                       // USD/t
    double production = kDefaultProductionTonnes;     // t
    double exporter_share = 0.25;
    double processed_volume = 1.0e6;                  // t
    std::pair<double, double> budget_gain_range{2.0, 18.0};  // million USD

    void validate() const;
};

struct ProducerLoss {
    double gross = 0.0;  // million USD
    double net = 0.0;
};

ProducerLoss producer_loss(const WelfareAssumptions& a);
double processor_gain(double processed_volume, double price_effect);
std::pair<double, double> net_welfare(double net_producer_loss, double processor_gain,
                                      std::pair<double, double> budget_gain_range);

struct WelfareReport {
    double gross_producer_loss = 0.0;
    double net_producer_loss = 0.0;
    double processor_gain = 0.0;
    std::pair<double, double> budget_gain_range{};
    std::pair<double, double> net_welfare_range{};
};

WelfareReport welfare_report(const WelfareAssumptions& a);

}  // namespace agripolicy::welfare
