#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/market_data.hpp"
#include "agripolicy/policy_welfare.hpp"

namespace agripolicy::io {

using nlohmann::ordered_json;

/// Leading `# key=value` lines echoing the run parameters into a CSV.
std::string csv_parameter_header(const std::map<std::string, std::string>& params);

// Impact estimation
ordered_json to_json(const bsts::Interval& i);
ordered_json to_json(const bsts::ImpactReport& r);
ordered_json to_json(const bsts::PosteriorDraws& d);
/// `date,actual,predicted_mean,predicted_lower,predicted_upper,effect_mean`
std::string impact_plot_csv(const bsts::ImpactReport& r);

// Price gaps
/// `date,internal,export,gap` on the common dates, gap = export - internal.
std::string gap_csv(const PriceSeries& internal, const PriceSeries& export_series);

// Balance validation
ordered_json to_json(const std::vector<BalanceValidation>& v);
std::string balance_csv(const std::vector<BalanceValidation>& v);

// VAT refunds
/// Header: my_label,soy_price_exw,meal_price_exw,oil_price_exw,soy_exports,
/// meal_exports,oil_exports,soy_production,vat_rate,producer_export_share_vat,
/// exemption_active[,soy_price_export]. Throws RowError on malformed rows.
std::vector<welfare::MarketingYearInputs> parse_marketing_year_csv(std::string_view text);
ordered_json to_json(const welfare::VatRefundReport& r);
/// One line per table cell, one column per marketing year.
std::string vat_report_csv(const welfare::VatRefundReport& r);

// Crush value added
ordered_json to_json(const welfare::ValueAddedResult& r, const welfare::RevenueReconciliation* rec);
std::string value_added_csv(const welfare::ValueAddedResult& r, const welfare::RevenueReconciliation* rec);

// Welfare
ordered_json to_json(const welfare::WelfareReport& r);
std::string welfare_csv(const welfare::WelfareReport& r);

}  // namespace agripolicy::io
