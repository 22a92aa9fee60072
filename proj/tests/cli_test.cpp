#include "agripolicy/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>
#include <unistd.h>

namespace fs = std::filesystem;
using agripolicy::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        // Golden files record input paths relative to the source tree.
        fs::current_path(AGRIPOLICY_SOURCE_DIR);
        dir_ = fs::temp_directory_path() /
               ("agripolicy_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string tmp(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        std::ofstream(dir_ / name, std::ios::binary) << content;
        return tmp(name);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"welfare", "--no-such-flag", "1"}).code, 1);
}

TEST_F(CliTest, HelpExitsZero) {
    const auto r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("vat-report"), std::string::npos);
}

TEST_F(CliTest, MissingFileExitsTwoNamingThePath) {
    const auto r = cli({"impact", "--prices", "no/such/prices.csv", "--target", "soy", "--output", tmp("x.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no/such/prices.csv"), std::string::npos);
    const auto v = cli({"vat-report", "--inputs", "missing_inputs.csv"});
    EXPECT_EQ(v.code, 2);
    EXPECT_NE(v.err.find("missing_inputs.csv"), std::string::npos);
}

TEST_F(CliTest, EmptyInputsExitTwo) {
    const auto path = write("empty.csv", "");
    EXPECT_EQ(cli({"vat-report", "--inputs", path}).code, 2);
    EXPECT_EQ(cli({"validate-balance", "--balance", path}).code, 2);
    EXPECT_EQ(cli({"gap", "--prices", path, "--internal", "a", "--export", "b"}).code, 2);
}

TEST_F(CliTest, MalformedRowsExitTwoWithLine) {
    const auto path = write("bad.csv", "date,series_id,price_usd_per_t,basis\n2018-09-07,soy,287,EXW\n2018-09-14,soy,-1,EXW\n");
    const auto r = cli({"gap", "--prices", path, "--internal", "soy", "--export", "soy"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST_F(CliTest, MalformedNumberFlagExitsTwo) {
    EXPECT_EQ(cli({"welfare", "--price-effect", "lots"}).code, 2);
    EXPECT_EQ(cli({"welfare", "--exporter-share", "1.5"}).code, 2);
    EXPECT_EQ(cli({"welfare", "--format", "xml"}).code, 2);
}

TEST_F(CliTest, VatReportZeroRateZeroesMoney) {
    const auto r = cli({"vat-report", "--inputs", "data/table1_inputs.csv", "--vat-rate", "0", "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["parameters"]["vat_rate"], "0");
    for (const auto& row : doc["report"]["rows"]) {
        for (const char* k : {"vat_oil_equiv", "vat_soy", "vat_total", "vat_total_indexed"}) {
            EXPECT_EQ(row[k].get<double>(), 0.0) << k;
        }
        if (!row["vat_soy_adjusted"].is_null()) EXPECT_EQ(row["vat_soy_adjusted"].get<double>(), 0.0);
    }
}

TEST_F(CliTest, ExportBasisWithoutExportPricesExitsTwo) {
    EXPECT_EQ(cli({"vat-report", "--inputs", "data/table1_inputs.csv", "--price-index-basis", "export"}).code, 2);
    EXPECT_EQ(cli({"vat-report", "--inputs", "data/table1_inputs.csv", "--price-index-basis", "world"}).code, 2);
}

TEST_F(CliTest, GoldenVatReport) {
    const auto out = tmp("vat.csv");
    ASSERT_EQ(cli({"vat-report", "--inputs", "data/table1_inputs.csv", "-o", out}).code, 0);
    EXPECT_EQ(slurp(out), slurp("tests/golden/vat_report.csv"));
}

TEST_F(CliTest, GoldenValueAdded) {
    const auto out = tmp("va.csv");
    const auto r = cli({"value-added", "--config", "data/table2.cfg", "-o", out});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(slurp(out), slurp("tests/golden/value_added.csv"));
    EXPECT_NE(r.err.find("oil_revenue 95.40 differs from formula value 114.48"), std::string::npos);
}

TEST_F(CliTest, GoldenWelfare) {
    const auto out = tmp("w.csv");
    ASSERT_EQ(cli({"welfare", "--config", "data/welfare.cfg", "-o", out}).code, 0);
    EXPECT_EQ(slurp(out), slurp("tests/golden/welfare.csv"));
    const auto json = tmp("w.json");
    ASSERT_EQ(cli({"welfare", "--format", "json", "-o", json}).code, 0);
    EXPECT_EQ(slurp(json), slurp("tests/golden/welfare_defaults.json"));
}

TEST_F(CliTest, GoldenBalance) {
    const auto out = tmp("b.csv");
    const auto r = cli({"validate-balance", "--balance", "data/table3_balance.csv", "-o", out});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "rows_passed=30/30 identities_passed=60/60\n");
    EXPECT_EQ(slurp(out), slurp("tests/golden/balance.csv"));
}

TEST_F(CliTest, BalanceViolationExitsTwo) {
    const auto path = write("bal.csv",
                            "marketing_year,commodity,beginning_stocks,production,imports,supply,exports,"
                            "domestic_consumption,ending_stocks,crush\n"
                            "2018/19,soybeans,150,1680,2,1832,989,740,100,560\n");
    const auto r = cli({"validate-balance", "--balance", path, "-o", tmp("out.csv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.out, "rows_passed=0/1 identities_passed=1/2\n");
}

TEST_F(CliTest, FlagBeatsEnvironmentBeatsConfig) {
    const auto cfg = write("w.cfg", "price_effect = 10\n");
    auto effect = [&](const std::vector<std::string>& extra) {
        std::vector<std::string> args{"welfare", "--format", "json", "--config", cfg};
        args.insert(args.end(), extra.begin(), extra.end());
        const auto r = cli(args);
        return nlohmann::json::parse(r.out)["report"]["processor_gain"].get<double>();
    };
    EXPECT_EQ(effect({}), 10.0);
    ::setenv("AGRIPOLICY_PRICE_EFFECT", "20", 1);
    EXPECT_EQ(effect({}), 20.0);
    EXPECT_EQ(effect({"--price-effect", "30"}), 30.0);
    ::unsetenv("AGRIPOLICY_PRICE_EFFECT");
}

TEST_F(CliTest, GapOnIdenticalSeriesIsZero) {
    const auto prices = write("p.csv",
                              "date,series_id,price_usd_per_t,basis\n"
                              "2018-08-24,a,300,EXW\n2018-08-31,a,305,EXW\n2018-09-07,a,290,EXW\n");
    const auto out = tmp("gap.csv");
    const auto r = cli({"gap", "--prices", prices, "--internal", "a", "--export", "a", "-o", out});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "gap_pre_mean=0.00 gap_post_mean=0.00\n");
    std::istringstream lines(slurp(out));
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line.starts_with("date,")) continue;
        EXPECT_TRUE(line.ends_with(",0") || line.ends_with(",0.00")) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, GapShowsInjectedShift) {
    const auto r = cli({"gap", "--prices", "data/synthetic_prices.csv", "--internal", "soy_exw_ua", "--export",
                        "soy_fob_ua", "-o", tmp("gap.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("gap_post_mean="), std::string::npos);
}

TEST_F(CliTest, ImpactIsDeterministicAndRecoversEffect) {
    auto impact = [&](const std::string& tag) {
        const auto json = tmp(tag + ".json");
        const auto r = cli({"impact", "--prices", "data/synthetic_prices.csv", "--target", "soy_exw_ua", "--output",
                            json, "--draws-json", tmp(tag + ".draws.json")});
        EXPECT_EQ(r.code, 0) << r.err;
        return std::make_tuple(r.out, slurp(json), slurp(tmp(tag + ".plot.csv")), slurp(tmp(tag + ".draws.json")));
    };
    const auto a = impact("a");
    const auto b = impact("b");
    EXPECT_EQ(a, b);
    EXPECT_TRUE(std::get<0>(a).starts_with("effect_mean="));

    const auto doc = nlohmann::json::parse(std::get<1>(a));
    const auto& effect = doc["report"]["average_effect"];
    const double sd = doc["report"]["average_effect_sd"].get<double>();
    EXPECT_NEAR(effect["mean"].get<double>(), -29.0, 3.0 * sd);
    EXPECT_EQ(doc["parameters"]["seed"], "20180901");
    EXPECT_EQ(doc["parameters"]["draws"], "2000");
    EXPECT_EQ(doc["panel"]["intervention_week"], "2018-09-07");
    EXPECT_TRUE(std::get<2>(a).starts_with("# "));
    EXPECT_NE(std::get<2>(a).find("date,actual,predicted_mean,predicted_lower,predicted_upper,effect_mean"),
              std::string::npos);
}

TEST_F(CliTest, ImpactSeedChangesOutput) {
    auto effect = [&](const std::string& seed) {
        return cli({"impact", "--prices", "data/synthetic_prices.csv", "--target", "soy_exw_ua", "--draws", "300",
                    "--burn", "100", "--seed", seed, "--output", tmp("s" + seed + ".json")})
            .out;
    };
    EXPECT_NE(effect("1"), effect("2"));
}

TEST_F(CliTest, ImpactRejectsBadSamplerSettings) {
    const std::vector<std::string> base{"impact", "--prices", "data/synthetic_prices.csv", "--target", "soy_exw_ua",
                                        "--output", tmp("x.json")};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args).code;
    };
    EXPECT_EQ(with({"--draws", "50"}), 2);
    EXPECT_EQ(with({"--burn", "3000"}), 2);
    EXPECT_EQ(with({"--intervention-date", "2030-01-01"}), 2);
    EXPECT_EQ(with({"--expected-model-size", "9"}), 2);
    EXPECT_EQ(cli({"impact", "--prices", "data/synthetic_prices.csv", "--target", "nope", "--output", tmp("y.json")}).code,
              2);
}

TEST_F(CliTest, BinaryExitCodes) {
    const std::string bin = AGRIPOLICY_CLI;
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " welfare -o " + tmp("w.csv") + " >/dev/null").c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " vat-report --inputs /nonexistent 2>/dev/null").c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " 2>/dev/null >/dev/null").c_str())), 1);
}
