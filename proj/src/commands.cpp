#include "agripolicy/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agripolicy/causal_bsts.hpp"
#include "agripolicy/errors.hpp"
#include "agripolicy/market_data.hpp"
#include "agripolicy/policy_welfare.hpp"
#include "agripolicy/serialization.hpp"

namespace agripolicy::cli {

namespace {

constexpr const char* kDefaultInterventionDate = "2018-09-01";

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write file " + path);
    f << content;
    if (!f) throw InputError("failed writing file " + path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Date parse_date_setting(const config::Settings& s, const std::string& key, const std::string& fallback) {
    const auto text = s.get_string(key, fallback);
    const auto d = Date::parse(text);
    if (!d) throw InputError(fmt::format("{}: malformed date '{}'", key, text));
    return *d;
}

enum class Format { csv, json };

Format output_format(const config::Settings& s, const std::string& fallback) {
    const auto f = s.get_string("format", fallback);
    if (f == "csv") return Format::csv;
    if (f == "json") return Format::json;
    throw InputError(fmt::format("format: expected csv or json, got '{}'", f));
}

/// Resolved settings minus where outputs go, so that artifacts do not depend
/// on their own file names.
std::map<std::string, std::string> echoed(const config::Settings& s) {
    auto m = s.resolved();
    for (const char* key : {"output", "plot_csv", "draws_json"}) m.erase(key);
    return m;
}

std::string dump(const io::ordered_json& j) { return j.dump(2) + "\n"; }

/// Wraps a command body with the exit-code contract.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
}

std::vector<PriceSeries> load_prices(const config::Settings& s) {
    const auto paths = split_list(s.get_string("prices", ""));
    if (paths.empty()) throw InputError("prices: at least one prices CSV path is required");
    std::vector<PriceSeries> all;
    std::set<std::string> ids;
    for (const auto& path : paths) {
        const auto parsed = parse_prices_csv(read_text(path));
        if (!parsed.ok()) {
            const auto& first = parsed.rejected.front();
            throw InputError(fmt::format("{}: line {}: {} ({} rows rejected)", path, first.line, first.message,
                                         parsed.rejected.size()));
        }
        for (const auto& series : parsed.series) {
            if (!ids.insert(series.id()).second) {
                throw InputError(fmt::format("{}: series {} defined in more than one file", path, series.id()));
            }
            all.push_back(series);
        }
    }
    return all;
}

const PriceSeries& find_series(const std::vector<PriceSeries>& all, const std::string& id, const char* role) {
    for (const auto& s : all) {
        if (s.id() == id) return s;
    }
    throw InputError(fmt::format("{} series '{}' not found in the prices input", role, id));
}

welfare::CrushYields yields_from(const config::Settings& s) {
    welfare::CrushYields y;
    y.oil_yield = s.get_real("oil_yield", y.oil_yield);
    y.meal_yield = s.get_real("meal_yield", y.meal_yield);
    y.validate();
    return y;
}

}  // namespace

int run_impact(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        const auto prices = load_prices(s);
        const auto target_id = s.get_string("target", "");
        if (target_id.empty()) throw InputError("target: the target series id is required");
        const auto& target = find_series(prices, target_id, "target");

        std::vector<PriceSeries> covariates;
        const auto requested = split_list(s.get_string("covariates", ""));
        if (requested.empty()) {
            for (const auto& p : prices) {
                if (p.id() != target_id) covariates.push_back(p);
            }
        } else {
            for (const auto& id : requested) covariates.push_back(find_series(prices, id, "covariate"));
        }
        if (covariates.empty()) throw InputError("impact needs at least one covariate series");

        const auto fill_text = s.get_string("fill_policy", "forward_fill");
        const auto fill = parse_fill_policy(fill_text);
        if (!fill) throw InputError("fill_policy: expected forward_fill or drop_week, got '" + fill_text + "'");
        const auto intervention = parse_date_setting(s, "intervention_date", kDefaultInterventionDate);
        const auto panel = align_weekly(target, covariates, intervention, *fill);

        bsts::ModelSpec spec;
        spec.observation_variance_prior.degrees_of_freedom =
            s.get_real("obs_prior_df", spec.observation_variance_prior.degrees_of_freedom);
        spec.observation_variance_prior.scale_fraction =
            s.get_real("obs_prior_scale", spec.observation_variance_prior.scale_fraction);
        spec.level_variance_prior.degrees_of_freedom =
            s.get_real("level_prior_df", spec.level_variance_prior.degrees_of_freedom);
        spec.level_variance_prior.scale_fraction =
            s.get_real("level_prior_scale", spec.level_variance_prior.scale_fraction);
        spec.expected_model_size = s.get_real(
            "expected_model_size", std::min(spec.expected_model_size, static_cast<double>(covariates.size())));
        spec.coefficient_prior_information = s.get_real("prior_information", spec.coefficient_prior_information);
        spec.initial_level_variance_multiplier =
            s.get_real("initial_level_multiplier", spec.initial_level_variance_multiplier);

        bsts::SamplerConfig sampler;
        sampler.total_draws = s.get_count("draws", sampler.total_draws);
        sampler.burn_in = s.get_count("burn", sampler.burn_in);
        sampler.seed = s.get_u64("seed", sampler.seed);
        sampler.chains = s.get_count("chains", sampler.chains);

        const auto output = s.get_string("output", "");
        if (output.empty() || output == "-") throw InputError("output: impact needs a JSON output path");
        auto plot_default = output;
        if (plot_default.size() > 5 && plot_default.ends_with(".json")) plot_default.resize(plot_default.size() - 5);
        plot_default += ".plot.csv";
        const auto plot_path = s.get_string("plot_csv", plot_default);
        const auto draws_path = s.get_string("draws_json", "");

        const auto run = bsts::estimate_impact(panel, spec, sampler);
        for (const auto& w : run.draws.warnings) err << "warning: " << w << "\n";

        io::ordered_json doc;
        doc["parameters"] = echoed(s);
        doc["panel"] = {{"target", panel.target_id},
                        {"covariates", panel.covariate_ids},
                        {"weeks", panel.size()},
                        {"pre_weeks", panel.pre_length()},
                        {"post_weeks", panel.post_length()},
                        {"first_week", panel.grid.front().to_string()},
                        {"intervention_week", panel.grid[panel.intervention_index].to_string()},
                        {"last_week", panel.grid.back().to_string()}};
        doc["warnings"] = run.draws.warnings;
        doc["report"] = io::to_json(run.report);
        write_text(output, dump(doc), out);
        write_text(plot_path, io::csv_parameter_header(echoed(s)) + io::impact_plot_csv(run.report), out);
        if (!draws_path.empty()) write_text(draws_path, dump(io::to_json(run.draws)), out);

        const auto& e = run.report.average_effect;
        out << fmt::format("effect_mean={:.2f} ci=[{:.2f},{:.2f}]\n", e.mean, e.lower, e.upper);
        return kSuccess;
    });
}

int run_vat_report(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        const auto path = s.get_string("inputs", "");
        if (path.empty()) throw InputError("inputs: a marketing-year inputs CSV is required");
        auto inputs = io::parse_marketing_year_csv(read_text(path));
        if (inputs.empty()) throw InputError(path + ": no marketing-year rows");
        if (auto rate = s.get_optional_real("vat_rate")) {
            for (auto& in : inputs) in.vat_rate = *rate;
        }
        if (auto share = s.get_optional_real("producer_share")) {
            for (auto& in : inputs) in.producer_export_share_vat = *share;
        }
        const auto yields = yields_from(s);
        const auto basis_text = s.get_string("price_index_basis", "internal");
        const auto basis = welfare::parse_price_index_basis(basis_text);
        if (!basis) throw InputError("price_index_basis: expected internal or export, got '" + basis_text + "'");
        const auto ref = s.get_string("reference_year", inputs.back().my_label);
        const auto fmt_kind = output_format(s, "csv");
        const auto output = s.get_string("output", "");

        const auto report = welfare::vat_refund_report(inputs, yields, ref, *basis);
        for (const auto& row : report.rows) {
            if (row.meal_basis_used) {
                err << "warning: " << row.my_label
                    << ": meal soybean equivalent exceeds oil; processed refund based on meal\n";
            }
        }
        if (fmt_kind == Format::json) {
            io::ordered_json doc{{"parameters", echoed(s)}, {"report", io::to_json(report)}};
            write_text(output, dump(doc), out);
        } else {
            write_text(output, io::csv_parameter_header(echoed(s)) + io::vat_report_csv(report), out);
        }
        return kSuccess;
    });
}

int run_value_added(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        welfare::ValueAddedInputs in;
        in.soy_export_price = s.get_real("soy_export_price", 332.0);
        in.oil_export_price = s.get_real("oil_export_price", 636.0);
        in.meal_export_price = s.get_real("meal_export_price", 365.0);
        in.yields = yields_from(s);
        in.processing_cost_range = {s.get_real("cost_low", 30.0), s.get_real("cost_high", 60.0)};
        const auto fmt_kind = output_format(s, "csv");
        const auto output = s.get_string("output", "");

        const auto result = welfare::value_added_margin(in);
        std::optional<welfare::RevenueReconciliation> rec;
        const auto p_soy = s.get_optional_real("published_soy_revenue");
        const auto p_oil = s.get_optional_real("published_oil_revenue");
        const auto p_meal = s.get_optional_real("published_meal_revenue");
        const auto p_margin = s.get_optional_real("published_margin");
        const int given = !!p_soy + !!p_oil + !!p_meal + !!p_margin;
        if (given != 0 && given != 4) {
            throw InputError("published revenue cells must be given all together (soy, oil, meal, margin)");
        }
        if (given == 4) {
            rec = welfare::reconcile_revenue_cells(in, {*p_soy, *p_oil, *p_meal, *p_margin});
            for (const auto& c : rec->cells) {
                if (c.discrepancy) {
                    err << fmt::format("note: published {} {:.2f} differs from formula value {:.2f}\n", c.name,
                                       c.published, c.computed);
                }
            }
        }
        const auto* rp = rec ? &*rec : nullptr;
        if (fmt_kind == Format::json) {
            io::ordered_json doc{{"parameters", echoed(s)}, {"result", io::to_json(result, rp)}};
            write_text(output, dump(doc), out);
        } else {
            write_text(output, io::csv_parameter_header(echoed(s)) + io::value_added_csv(result, rp), out);
        }
        return kSuccess;
    });
}

int run_welfare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        welfare::WelfareAssumptions a;
        a.price_effect = s.get_real("price_effect", a.price_effect);
        a.production = s.get_real("production", a.production);
        a.exporter_share = s.get_real("exporter_share", a.exporter_share);
        a.processed_volume = s.get_real("processed_volume", a.processed_volume);
        a.budget_gain_range = {s.get_real("budget_low", a.budget_gain_range.first),
                               s.get_real("budget_high", a.budget_gain_range.second)};
        const auto fmt_kind = output_format(s, "csv");
        const auto output = s.get_string("output", "");
        const auto report = welfare::welfare_report(a);
        if (fmt_kind == Format::json) {
            io::ordered_json doc{{"parameters", echoed(s)}, {"report", io::to_json(report)}};
            write_text(output, dump(doc), out);
        } else {
            write_text(output, io::csv_parameter_header(echoed(s)) + io::welfare_csv(report), out);
        }
        return kSuccess;
    });
}

int run_gap(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        const auto prices = load_prices(s);
        const auto internal_id = s.get_string("internal", "");
        const auto export_id = s.get_string("export", "");
        if (internal_id.empty() || export_id.empty()) throw InputError("gap needs both --internal and --export ids");
        const auto& internal = find_series(prices, internal_id, "internal");
        const auto& exported = find_series(prices, export_id, "export");
        const auto intervention = parse_date_setting(s, "intervention_date", kDefaultInterventionDate);
        const auto fmt_kind = output_format(s, "csv");
        const auto output = s.get_string("output", "");

        const auto gap = price_gap_series(exported, internal);
        double pre_sum = 0.0;
        double post_sum = 0.0;
        std::size_t pre_n = 0;
        std::size_t post_n = 0;
        for (const auto& o : gap.observations()) {
            if (o.date < intervention) {
                pre_sum += o.price;
                ++pre_n;
            } else {
                post_sum += o.price;
                ++post_n;
            }
        }
        if (fmt_kind == Format::json) {
            auto rows = io::ordered_json::array();
            for (const auto& o : gap.observations()) {
                rows.push_back({{"date", o.date.to_string()},
                                {"internal", *internal.at(o.date)},
                                {"export", *exported.at(o.date)},
                                {"gap", o.price}});
            }
            io::ordered_json doc{{"parameters", echoed(s)}, {"rows", std::move(rows)}};
            write_text(output, dump(doc), out);
        } else {
            write_text(output, io::csv_parameter_header(echoed(s)) + io::gap_csv(internal, exported), out);
        }
        if (!output.empty() && output != "-") {
            auto mean_or_na = [](double sum, std::size_t n) {
                return n == 0 ? std::string("na") : fmt::format("{:.2f}", sum / static_cast<double>(n));
            };
            out << fmt::format("gap_pre_mean={} gap_post_mean={}\n", mean_or_na(pre_sum, pre_n),
                               mean_or_na(post_sum, post_n));
        }
        return kSuccess;
    });
}

int run_validate_balance(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto& s = cfg.settings;
        const auto path = s.get_string("balance", "");
        if (path.empty()) throw InputError("balance: a balance CSV path is required");
        const auto rows = parse_balance_csv(read_text(path));
        if (rows.empty()) throw InputError(path + ": no balance rows");
        const double tol = s.get_real("tolerance", kBalanceTolerance);
        const auto fmt_kind = output_format(s, "csv");
        const auto output = s.get_string("output", "");

        std::vector<BalanceValidation> results;
        std::size_t rows_ok = 0;
        std::size_t ids_ok = 0;
        std::size_t ids_total = 0;
        for (const auto& b : rows) {
            results.push_back(validate_balance(b, tol));
            rows_ok += results.back().passed() ? 1 : 0;
            for (const auto& c : results.back().checks) {
                ++ids_total;
                ids_ok += c.passed ? 1 : 0;
            }
        }
        if (fmt_kind == Format::json) {
            io::ordered_json doc{{"parameters", echoed(s)}, {"validation", io::to_json(results)}};
            write_text(output, dump(doc), out);
        } else {
            write_text(output, io::csv_parameter_header(echoed(s)) + io::balance_csv(results), out);
        }
        const auto summary = fmt::format("rows_passed={}/{} identities_passed={}/{}\n", rows_ok, rows.size(), ids_ok,
                                         ids_total);
        if (!output.empty() && output != "-") out << summary;
        if (rows_ok != rows.size()) {
            err << "error: balance identities violated: " << summary;
            return kInputError;
        }
        return kSuccess;
    });
}

namespace {

struct OptionSpec {
    const char* flag;
    const char* key;
    const char* help;
};

// clang-format off
const std::vector<OptionSpec> kCommonOptions = {
    {"--config", "config", "key=value file with settings for this command"},
    {"--output,-o", "output", "output path ('-' or omitted: stdout)"},
    {"--format", "format", "csv or json"},
};

const std::vector<OptionSpec> kImpactOptions = {
    {"--prices", "prices", "prices CSV path(s), comma-separated"},
    {"--target", "target", "target series id"},
    {"--covariates", "covariates", "covariate series ids, comma-separated (default: all others)"},
    {"--intervention-date", "intervention_date", "first post-intervention date (default 2018-09-01)"},
    {"--fill-policy", "fill_policy", "forward_fill or drop_week"},
    {"--draws", "draws", "total Gibbs draws per chain (default 2000)"},
    {"--burn", "burn", "burn-in draws per chain (default 500)"},
    {"--seed", "seed", "root random seed"},
    {"--chains", "chains", "independent chains run concurrently (default 1)"},
    {"--plot-csv", "plot_csv", "plot-data CSV path (default <output>.plot.csv)"},
    {"--draws-json", "draws_json", "also write posterior draws as JSON"},
    {"--obs-prior-df", "obs_prior_df", "observation variance prior degrees of freedom"},
    {"--obs-prior-scale", "obs_prior_scale", "observation sd prior guess, fraction of sd(y)"},
    {"--level-prior-df", "level_prior_df", "level variance prior degrees of freedom"},
    {"--level-prior-scale", "level_prior_scale", "level sd prior guess, fraction of sd(y)"},
    {"--expected-model-size", "expected_model_size", "prior expected number of covariates"},
    {"--prior-information", "prior_information", "coefficient prior information weight g"},
    {"--initial-level-multiplier", "initial_level_multiplier", "diffuse initial level variance multiplier"},
};

const std::vector<OptionSpec> kVatOptions = {
    {"--inputs", "inputs", "marketing-year inputs CSV"},
    {"--reference-year", "reference_year", "index reference year (default: last row)"},
    {"--price-index-basis", "price_index_basis", "internal or export"},
    {"--vat-rate", "vat_rate", "override the VAT rate of every row"},
    {"--producer-share", "producer_share", "override the refundable producer export share"},
    {"--oil-yield", "oil_yield", "oil crush yield"},
    {"--meal-yield", "meal_yield", "meal crush yield"},
};

const std::vector<OptionSpec> kValueAddedOptions = {
    {"--soy-export-price", "soy_export_price", "USD/t"},
    {"--oil-export-price", "oil_export_price", "USD/t"},
    {"--meal-export-price", "meal_export_price", "USD/t"},
    {"--oil-yield", "oil_yield", "oil crush yield"},
    {"--meal-yield", "meal_yield", "meal crush yield"},
    {"--cost-low", "cost_low", "processing cost range low, USD/t"},
    {"--cost-high", "cost_high", "processing cost range high, USD/t"},
    {"--published-soy-revenue", "published_soy_revenue", "printed cell to reconcile"},
    {"--published-oil-revenue", "published_oil_revenue", "printed cell to reconcile"},
    {"--published-meal-revenue", "published_meal_revenue", "printed cell to reconcile"},
    {"--published-margin", "published_margin", "printed cell to reconcile"},
};

const std::vector<OptionSpec> kWelfareOptions = {
    {"--price-effect", "price_effect", "domestic price reduction, USD/t (default 26)"},
    {"--production", "production", "soybean production, t"},
    {"--exporter-share", "exporter_share", "share of the crop grown by exporting producers (default 0.25)"},
    {"--processed-volume", "processed_volume", "soybeans crushed domestically, t"},
    {"--budget-low", "budget_low", "budget gain range low, million USD"},
    {"--budget-high", "budget_high", "budget gain range high, million USD"},
};

const std::vector<OptionSpec> kGapOptions = {
    {"--prices", "prices", "prices CSV path(s), comma-separated"},
    {"--internal", "internal", "internal (EXW) series id"},
    {"--export", "export", "export (FOB) series id"},
    {"--intervention-date", "intervention_date", "split date for the before/after summary"},
};

const std::vector<OptionSpec> kBalanceOptions = {
    {"--balance", "balance", "balance CSV path"},
    {"--tolerance", "tolerance", "identity tolerance, thousand t (default 0.5)"},
};
// clang-format on

void add_options(CLI::App* sub, RunConfig& cfg, const std::vector<OptionSpec>& specs) {
    for (const auto& o : specs) {
        const std::string key = o.key;
        sub->add_option_function<std::string>(o.flag, [&cfg, key](const std::string& v) { cfg.settings.set_flag(key, v); },
                                              o.help);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Commodity price intervention analysis and export-VAT welfare accounting", "agripolicy"};
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
        const std::vector<OptionSpec>* options;
        int (*fn)(const RunConfig&, std::ostream&, std::ostream&);
    };
    const std::vector<Entry> entries = {
        {"impact", "estimate the price effect of an intervention", &kImpactOptions, &run_impact},
        {"vat-report", "VAT refund obligations per marketing year", &kVatOptions, &run_vat_report},
        {"value-added", "crush value-added margin per tonne of soybeans", &kValueAddedOptions, &run_value_added},
        {"welfare", "producer, processor and budget welfare effects", &kWelfareOptions, &run_welfare},
        {"gap", "export-minus-internal price gap series", &kGapOptions, &run_gap},
        {"validate-balance", "check supply/use balance identities", &kBalanceOptions, &run_validate_balance},
    };
    std::vector<RunConfig> configs(entries.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        configs[i].command = entries[i].name;
        auto* sub = app.add_subcommand(entries[i].name, entries[i].help);
        add_options(sub, configs[i], kCommonOptions);
        add_options(sub, configs[i], *entries[i].options);
        subs.push_back(sub);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        for (auto* sub : subs) {
            if (sub->parsed()) err << sub->help();
        }
        return kUsageError;
    }

    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        auto& cfg = configs[i];
        const int loaded = guarded(err, [&] {
            if (auto path = cfg.settings.lookup("config")) {
                cfg.settings.set_file(config::parse_key_value(read_text(*path)));
            }
            return kSuccess;
        });
        if (loaded != kSuccess) return loaded;
        return entries[i].fn(cfg, out, err);
    }
    return kUsageError;
}

}  // namespace agripolicy::cli
