#include "agripolicy/market_data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "agripolicy/errors.hpp"

namespace agripolicy {

namespace {

constexpr std::string_view kPricesHeader = "date,series_id,price_usd_per_t,basis";
constexpr std::string_view kBalanceHeader =
    "marketing_year,commodity,beginning_stocks,production,imports,supply,exports,"
    "domestic_consumption,ending_stocks,crush";
constexpr long kSnapDays = 3;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

/// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        if (!trim(line).empty()) fn(line_no, trim(line));
        if (end == text.size()) break;
        start = end + 1;
    }
}

std::optional<double> parse_real(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Index of the observation snapped to `grid_date`, if any lies within
/// +/- kSnapDays. Nearest wins; the earlier date wins a tie.
std::optional<std::size_t> snap(const std::vector<Observation>& obs, Date grid_date) {
    const Date lo = grid_date.plus_days(-kSnapDays);
    const Date hi = grid_date.plus_days(kSnapDays);
    auto it = std::lower_bound(obs.begin(), obs.end(), lo,
                               [](const Observation& o, Date d) { return o.date < d; });
    std::optional<std::size_t> best;
    long best_dist = 0;
    for (; it != obs.end() && it->date <= hi; ++it) {
        const long dist = std::labs(grid_date.days_until(it->date));
        if (!best || dist < best_dist) {
            best = static_cast<std::size_t>(it - obs.begin());
            best_dist = dist;
        }
    }
    return best;
}

unsigned modal_weekday(const PriceSeries& s) {
    std::array<std::size_t, 7> counts{};
    for (const auto& o : s.observations()) ++counts[o.date.iso_weekday_index()];
    return static_cast<unsigned>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

std::string_view to_string(PriceBasis basis) {
    switch (basis) {
        case PriceBasis::EXW: return "EXW";
        case PriceBasis::FOB: return "FOB";
        case PriceBasis::CBOT: return "CBOT";
    }
    return "EXW";
}

std::optional<PriceBasis> parse_basis(std::string_view text) {
    if (text == "EXW") return PriceBasis::EXW;
    if (text == "FOB") return PriceBasis::FOB;
    if (text == "CBOT") return PriceBasis::CBOT;
    return std::nullopt;
}

PriceSeries::PriceSeries(std::string series_id, PriceBasis basis, std::vector<Observation> observations)
    : id_(std::move(series_id)), basis_(basis), observations_(std::move(observations)) {
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        if (!std::isfinite(observations_[i].price)) {
            throw InputError(fmt::format("series {}: non-finite value on {}", id_,
                                         observations_[i].date.to_string()));
        }
        if (i > 0 && !(observations_[i - 1].date < observations_[i].date)) {
            throw InputError(fmt::format("series {}: dates not strictly increasing at {}", id_,
                                         observations_[i].date.to_string()));
        }
    }
}

Date PriceSeries::first_date() const {
    if (observations_.empty()) throw InputError("series " + id_ + " is empty");
    return observations_.front().date;
}

Date PriceSeries::last_date() const {
    if (observations_.empty()) throw InputError("series " + id_ + " is empty");
    return observations_.back().date;
}

std::optional<double> PriceSeries::at(Date date) const {
    auto it = std::lower_bound(observations_.begin(), observations_.end(), date,
                               [](const Observation& o, Date d) { return o.date < d; });
    if (it == observations_.end() || it->date != date) return std::nullopt;
    return it->price;
}

void PriceParseResult::require_clean() const {
    if (!rejected.empty()) throw RowError(rejected.front().line, rejected.front().message);
}

const PriceSeries* PriceParseResult::find(std::string_view id) const {
    for (const auto& s : series) {
        if (s.id() == id) return &s;
    }
    return nullptr;
}

PriceParseResult parse_prices_csv(std::string_view text) {
    struct Pending {
        PriceBasis basis;
        std::map<Date, std::pair<double, std::size_t>> rows;  // date -> (price, line)
    };
    std::map<std::string, Pending, std::less<>> grouped;
    PriceParseResult result;
    bool first = true;

    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (first) {
            first = false;
            if (line == kPricesHeader) return;
        }
        auto reject = [&](std::string msg) { result.rejected.push_back({line_no, std::move(msg)}); };
        const auto f = split_fields(line);
        if (f.size() != 4) {
            reject(fmt::format("expected 4 fields, found {}", f.size()));
            return;
        }
        const auto date = Date::parse(f[0]);
        if (!date) return reject(fmt::format("malformed date '{}'", f[0]));
        if (f[1].empty()) return reject("empty series_id");
        const auto price = parse_real(f[2]);
        if (!price) return reject(fmt::format("malformed price '{}'", f[2]));
        if (*price <= 0.0) return reject(fmt::format("non-positive price {}", *price));
        const auto basis = parse_basis(f[3]);
        if (!basis) return reject(fmt::format("unknown basis '{}'", f[3]));

        auto it = grouped.find(f[1]);
        if (it == grouped.end()) {
            it = grouped.emplace(std::string(f[1]), Pending{*basis, {}}).first;
        } else if (it->second.basis != *basis) {
            return reject(fmt::format("series {} mixes bases {} and {}", f[1],
                                      to_string(it->second.basis), to_string(*basis)));
        }
        auto [pos, inserted] = it->second.rows.emplace(*date, std::make_pair(*price, line_no));
        if (!inserted) {
            return reject(fmt::format("duplicate date {} for series {} (first seen on line {})",
                                      f[0], f[1], pos->second.second));
        }
    });

    for (auto& [id, pending] : grouped) {
        std::vector<Observation> obs;
        obs.reserve(pending.rows.size());
        for (const auto& [date, row] : pending.rows) obs.push_back({date, row.first});
        result.series.emplace_back(id, pending.basis, std::move(obs));
    }
    return result;
}

std::string serialize_prices_csv(const std::vector<PriceSeries>& series) {
    std::string out{kPricesHeader};
    out += '\n';
    for (const auto& s : series) {
        for (const auto& o : s.observations()) {
            out += fmt::format("{},{},{},{}\n", o.date.to_string(), s.id(), o.price, to_string(s.basis()));
        }
    }
    return out;
}

std::optional<FillPolicy> parse_fill_policy(std::string_view text) {
    if (text == "forward_fill") return FillPolicy::forward_fill;
    if (text == "drop_week") return FillPolicy::drop_week;
    return std::nullopt;
}

void AlignedPanel::validate() const {
    const auto n = grid.size();
    if (target.size() != n) throw InputError("panel target length differs from grid length");
    if (covariate_ids.size() != covariates.size()) throw InputError("panel covariate ids/columns mismatch");
    for (std::size_t j = 0; j < covariates.size(); ++j) {
        if (covariates[j].size() != n) {
            throw InputError("panel covariate " + covariate_ids[j] + " length differs from grid length");
        }
        for (double v : covariates[j]) {
            if (!std::isfinite(v)) throw InputError("panel covariate " + covariate_ids[j] + " has missing values");
        }
    }
    if (intervention_index == 0 || intervention_index >= n) {
        throw InputError(fmt::format("intervention index {} outside (0, {})", intervention_index, n));
    }
    if (standardized) {
        if (covariate_scales.size() != covariates.size()) throw InputError("standardization metadata incomplete");
        if (!(target_scale.sd > 0.0)) throw InputError("target standard deviation must be positive");
        for (const auto& s : covariate_scales) {
            if (!(s.sd > 0.0)) throw InputError("covariate standard deviation must be positive");
        }
    }
}

AlignedPanel align_weekly(const PriceSeries& target, const std::vector<PriceSeries>& covariates,
                          Date intervention_date, FillPolicy fill) {
    if (target.empty()) throw InputError("target series " + target.id() + " is empty");
    Date range_start = target.first_date();
    Date range_end = target.last_date();
    for (const auto& c : covariates) {
        if (c.empty()) throw InputError("covariate " + c.id() + " has no observations in range");
        range_start = std::max(range_start, c.first_date());
        range_end = std::min(range_end, c.last_date());
    }
    if (range_end < range_start) throw InputError("series share no common date range");
    if (intervention_date < range_start || intervention_date > range_end) {
        throw InputError(fmt::format("intervention date {} outside common range [{}, {}]",
                                     intervention_date.to_string(), range_start.to_string(),
                                     range_end.to_string()));
    }

    const unsigned anchor = modal_weekday(target);
    Date g = range_start;
    while (g.iso_weekday_index() != anchor) g = g.plus_days(1);

    AlignedPanel panel;
    panel.target_id = target.id();
    panel.covariates.resize(covariates.size());
    for (const auto& c : covariates) panel.covariate_ids.push_back(c.id());

    const auto& tobs = target.observations();
    std::vector<bool> seen(covariates.size(), false);
    for (; g <= range_end; g = g.plus_days(7)) {
        std::vector<double> row(covariates.size());
        bool complete = true;
        bool filled = false;
        for (std::size_t j = 0; j < covariates.size(); ++j) {
            const auto& obs = covariates[j].observations();
            if (auto k = snap(obs, g)) {
                row[j] = obs[*k].price;
                seen[j] = true;
                continue;
            }
            if (fill == FillPolicy::drop_week) {
                complete = false;
                break;
            }
            if (!panel.covariates[j].empty()) {
                row[j] = panel.covariates[j].back();
            } else {
                // Leading gap: carry the latest observation before the window.
                auto it = std::lower_bound(obs.begin(), obs.end(), g,
                                           [](const Observation& o, Date d) { return o.date < d; });
                if (it == obs.begin()) {
                    complete = false;
                    break;
                }
                row[j] = std::prev(it)->price;
            }
            filled = true;
        }
        if (!complete) continue;
        panel.grid.push_back(g);
        if (auto k = snap(tobs, g)) {
            panel.target.emplace_back(tobs[*k].price);
        } else {
            panel.target.emplace_back(std::nullopt);
        }
        for (std::size_t j = 0; j < covariates.size(); ++j) panel.covariates[j].push_back(row[j]);
        panel.filled.push_back(filled);
    }

    for (std::size_t j = 0; j < covariates.size(); ++j) {
        if (!seen[j]) throw InputError("covariate " + covariates[j].id() + " has no observations in range");
    }
    auto it = std::lower_bound(panel.grid.begin(), panel.grid.end(), intervention_date);
    if (it == panel.grid.end()) {
        throw InputError("intervention date " + intervention_date.to_string() + " is after the last grid week");
    }
    panel.intervention_index = static_cast<std::size_t>(it - panel.grid.begin());
    const auto observed_pre = static_cast<std::size_t>(
        std::count_if(panel.target.begin(), panel.target.begin() + static_cast<long>(panel.intervention_index),
                      [](const auto& v) { return v.has_value(); }));
    if (panel.intervention_index < kMinPrePeriodWeeks || observed_pre < kMinPrePeriodWeeks) {
        throw InputError(fmt::format("insufficient pre-period: {} weeks ({} observed), need at least {}",
                                     panel.intervention_index, observed_pre, kMinPrePeriodWeeks));
    }
    panel.validate();
    return panel;
}

PriceSeries price_gap_series(const PriceSeries& a, const PriceSeries& b) {
    std::vector<Observation> out;
    const auto& ao = a.observations();
    const auto& bo = b.observations();
    std::size_t i = 0;
    std::size_t k = 0;
    while (i < ao.size() && k < bo.size()) {
        if (ao[i].date < bo[k].date) {
            ++i;
        } else if (bo[k].date < ao[i].date) {
            ++k;
        } else {
            out.push_back({ao[i].date, ao[i].price - bo[k].price});
            ++i;
            ++k;
        }
    }
    if (out.empty()) throw InputError("series " + a.id() + " and " + b.id() + " share no dates");
    return PriceSeries(a.id() + "-minus-" + b.id(), a.basis(), std::move(out));
}

std::pair<Date, Date> marketing_year_window(std::string_view label, unsigned start_month) {
    const auto slash = label.find('/');
    auto bad = [&] { return InputError(fmt::format("malformed marketing-year label '{}'", label)); };
    if (slash != 4 || start_month < 1 || start_month > 12) throw bad();
    int first = 0;
    int second = 0;
    const auto a = label.substr(0, 4);
    const auto b = label.substr(5);
    if (std::from_chars(a.data(), a.data() + a.size(), first).ptr != a.data() + a.size()) throw bad();
    if (b.size() != 2 && b.size() != 4) throw bad();
    if (std::from_chars(b.data(), b.data() + b.size(), second).ptr != b.data() + b.size()) throw bad();
    const int expected = b.size() == 2 ? (first + 1) % 100 : first + 1;
    if (second != expected) throw bad();
    const Date start(first, start_month, 1);
    const Date next(first + 1, start_month, 1);
    return {start, next.plus_days(-1)};
}

double marketing_year_mean(const PriceSeries& series, std::string_view my_label, unsigned my_start_month) {
    const auto [start, end] = marketing_year_window(my_label, my_start_month);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : series.observations()) {
        if (o.date >= start && o.date <= end) {
            sum += o.price;
            ++n;
        }
    }
    if (n == 0) {
        throw InputError(fmt::format("series {} has no observations in marketing year {}", series.id(), my_label));
    }
    return sum / static_cast<double>(n);
}

std::string_view to_string(Commodity c) {
    switch (c) {
        case Commodity::soybeans: return "soybeans";
        case Commodity::soybean_meal: return "soybean_meal";
        case Commodity::soybean_oil: return "soybean_oil";
    }
    return "soybeans";
}

std::optional<Commodity> parse_commodity(std::string_view text) {
    if (text == "soybeans") return Commodity::soybeans;
    if (text == "soybean_meal") return Commodity::soybean_meal;
    if (text == "soybean_oil") return Commodity::soybean_oil;
    return std::nullopt;
}

bool BalanceValidation::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

BalanceValidation validate_balance(const MarketingYearBalance& b, double tolerance) {
    BalanceValidation v{b.marketing_year, b.commodity, {}};
    const double supply_residual = b.beginning_stocks + b.production + b.imports - b.supply;
    const double stocks_residual = b.supply - b.exports - b.domestic_consumption - b.ending_stocks;
    v.checks.push_back({"supply = beginning_stocks + production + imports", supply_residual,
                        std::abs(supply_residual) <= tolerance});
    v.checks.push_back({"ending_stocks = supply - exports - domestic_consumption", stocks_residual,
                        std::abs(stocks_residual) <= tolerance});
    return v;
}

std::vector<MarketingYearBalance> parse_balance_csv(std::string_view text) {
    std::vector<MarketingYearBalance> out;
    bool first = true;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (first) {
            first = false;
            if (line == kBalanceHeader) return;
        }
        const auto f = split_fields(line);
        if (f.size() != 10) throw RowError(line_no, fmt::format("expected 10 fields, found {}", f.size()));
        MarketingYearBalance b;
        b.marketing_year = std::string(f[0]);
        marketing_year_window(b.marketing_year);  // validates the label
        const auto c = parse_commodity(f[1]);
        if (!c) throw RowError(line_no, fmt::format("unknown commodity '{}'", f[1]));
        b.commodity = *c;
        std::array<double*, 7> targets{&b.beginning_stocks, &b.production, &b.imports, &b.supply,
                                       &b.exports, &b.domestic_consumption, &b.ending_stocks};
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const auto v = parse_real(f[k + 2]);
            if (!v || *v < 0.0) throw RowError(line_no, fmt::format("invalid quantity '{}'", f[k + 2]));
            *targets[k] = *v;
        }
        if (!f[9].empty()) {
            const auto v = parse_real(f[9]);
            if (!v || *v < 0.0) throw RowError(line_no, fmt::format("invalid crush '{}'", f[9]));
            if (b.commodity != Commodity::soybeans) throw RowError(line_no, "crush given for a non-soybean row");
            b.crush = *v;
        }
        out.push_back(std::move(b));
    });
    return out;
}

}  // namespace agripolicy
