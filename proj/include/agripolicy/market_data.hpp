#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agripolicy/date.hpp"

namespace agripolicy {

enum class PriceBasis { EXW, FOB, CBOT };

std::string_view to_string(PriceBasis basis);
std::optional<PriceBasis> parse_basis(std::string_view text);

struct Observation {
    Date date;
    double price = 0.0;  // USD per tonne

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Date-ordered observations of one commodity price on one basis.
///
/// Construction enforces strictly increasing dates and finite values.
/// Ingested prices are additionally required to be positive by the parser;
/// derived series such as price gaps may carry zero or negative values.
class PriceSeries {
public:
    PriceSeries() = default;
    PriceSeries(std::string series_id, PriceBasis basis, std::vector<Observation> observations);

    const std::string& id() const { return id_; }
    PriceBasis basis() const { return basis_; }
    const std::vector<Observation>& observations() const { return observations_; }
    std::size_t size() const { return observations_.size(); }
    bool empty() const { return observations_.empty(); }
    Date first_date() const;
    Date last_date() const;

    /// Observation on exactly this date, if any.
    std::optional<double> at(Date date) const;

private:
    std::string id_;
    PriceBasis basis_ = PriceBasis::EXW;
    std::vector<Observation> observations_;
};

struct RowDiagnostic {
    std::size_t line = 0;  // 1-based line number in the input text
    std::string message;
};

struct PriceParseResult {
    std::vector<PriceSeries> series;  // sorted by series id
    std::vector<RowDiagnostic> rejected;

    bool ok() const { return rejected.empty(); }
    /// Throws RowError for the first rejected row, if any.
    void require_clean() const;
    const PriceSeries* find(std::string_view id) const;
};

/// Parses `date,series_id,price_usd_per_t,basis` rows. The header line is
/// optional. Rows that fail validation are reported in `rejected`; the
/// remaining rows still form series. Empty input yields no series.
PriceParseResult parse_prices_csv(std::string_view text);

/// Inverse of parse_prices_csv; writes a header and rows grouped by series.
std::string serialize_prices_csv(const std::vector<PriceSeries>& series);

enum class FillPolicy { forward_fill, drop_week };

std::optional<FillPolicy> parse_fill_policy(std::string_view text);

struct ColumnScale {
    double mean = 0.0;
    double sd = 1.0;

    friend bool operator==(const ColumnScale&, const ColumnScale&) = default;
};

/// Target series and complete covariate columns on a shared weekly grid.
struct AlignedPanel {
    std::string target_id;
    std::vector<std::string> covariate_ids;
    std::vector<Date> grid;
    std::vector<std::optional<double>> target;
    std::vector<std::vector<double>> covariates;  // covariates[j][t]
    std::size_t intervention_index = 0;
    /// Per-week flag: at least one covariate value was forward-filled.
    std::vector<bool> filled;

    bool standardized = false;
    ColumnScale target_scale;
    std::vector<ColumnScale> covariate_scales;

    std::size_t size() const { return grid.size(); }
    std::size_t covariate_count() const { return covariates.size(); }
    std::size_t pre_length() const { return intervention_index; }
    std::size_t post_length() const { return grid.size() - intervention_index; }

    /// Throws InputError when a structural invariant is broken.
    void validate() const;
};

inline constexpr std::size_t kMinPrePeriodWeeks = 20;

/// Places target and covariates on a weekly grid anchored on the target's
/// modal weekday. Covariate observations within three days of a grid date
/// are snapped to it (nearest wins, earlier on ties); gaps are then filled
/// or the week dropped per `fill`.
AlignedPanel align_weekly(const PriceSeries& target, const std::vector<PriceSeries>& covariates,
                          Date intervention_date, FillPolicy fill);

/// a - b on every common date, id "<a>-minus-<b>".
PriceSeries price_gap_series(const PriceSeries& a, const PriceSeries& b);

/// Inclusive [start, end] dates of a marketing-year label such as "2018/19"
/// or "2018/2019", starting on the first of `start_month`.
std::pair<Date, Date> marketing_year_window(std::string_view label, unsigned start_month = 9);

double marketing_year_mean(const PriceSeries& series, std::string_view my_label,
                           unsigned my_start_month = 9);

enum class Commodity { soybeans, soybean_meal, soybean_oil };

std::string_view to_string(Commodity c);
std::optional<Commodity> parse_commodity(std::string_view text);

/// Supply/use balance of one commodity in one marketing year, thousand tonnes.
struct MarketingYearBalance {
    std::string marketing_year;
    Commodity commodity = Commodity::soybeans;
    double beginning_stocks = 0.0;
    double production = 0.0;
    double imports = 0.0;
    double supply = 0.0;
    double exports = 0.0;
    double domestic_consumption = 0.0;
    double ending_stocks = 0.0;
    std::optional<double> crush;
};

inline constexpr double kBalanceTolerance = 0.5;

struct IdentityCheck {
    std::string name;
    double residual = 0.0;
    bool passed = false;
};

struct BalanceValidation {
    std::string marketing_year;
    Commodity commodity = Commodity::soybeans;
    std::vector<IdentityCheck> checks;
    bool passed() const;
};

BalanceValidation validate_balance(const MarketingYearBalance& b, double tolerance = kBalanceTolerance);

/// Parses the balance CSV. Throws RowError on the first malformed row.
std::vector<MarketingYearBalance> parse_balance_csv(std::string_view text);

}  // namespace agripolicy
