#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "agripolicy/config.hpp"

namespace agripolicy::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kInputError = 2, kNumericalError = 3 };

struct RunConfig {
    std::string command;  // impact, vat-report, value-added, welfare, gap, validate-balance
    config::Settings settings;
};

int run_impact(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_vat_report(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_value_added(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_welfare(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_gap(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_validate_balance(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv-style arguments (without the program name) and dispatches.
/// Never throws; every failure is reported on `err` with its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agripolicy::cli
