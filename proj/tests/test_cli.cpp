#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "carrytail/cli.hpp"
#include "carrytail/data_ingest.hpp"
#include "carrytail/serialization.hpp"

namespace fs = std::filesystem;
using carrytail::cli::run;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / "carrytail_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rows.push_back(f);
    }
    return rows;
}

std::string p(const fs::path& x) { return x.string(); }

// Small panel shared by the pipeline tests.
const fs::path& small_panel() {
    static const fs::path dir = [] {
        auto d = scratch("small_panel");
        EXPECT_EQ(run({"simulate", "--out", p(d), "--seed", "3", "--currencies", "8", "--years", "1"}), 0);
        return d;
    }();
    return dir;
}

void write_fits(const fs::path& file, const std::vector<std::string>& mixtures, const std::vector<std::string>& dates) {
    std::ofstream out(file);
    out << R"({"provenance":{"tool":"carrytail"}})" << '\n';
    for (std::size_t i = 0; i < dates.size(); ++i)
        out << R"({"end_date":")" << dates[i] << R"(","side":"high_ir","basket":["A","B","C"],"model":"cfg","mixture":)"
            << mixtures[i] << R"(,"loglik":1.0,"aic":8.0})" << '\n';
}

}  // namespace

TEST(Cli, EmptyInputFails) {
    auto d = scratch("empty");
    std::ofstream(d / "empty.csv").close();
    EXPECT_EQ(run({"fit-marginals", "--input", p(d / "empty.csv"), "--out", p(d)}), 1);
    EXPECT_EQ(run({"fit-copulas", "--input", p(d / "missing.csv"), "--out", p(d)}), 1);
    EXPECT_NE(run({"no-such-command"}), 0);
}

TEST(Cli, BinaryReportsInputError) {
    auto d = scratch("binary");
    std::ofstream(d / "empty.csv").close();
    const std::string cmd = std::string(CARRYTAIL_CLI) + " backtest --input " + p(d / "empty.csv") + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 1);
}

TEST(Cli, SimulateIsDeterministicAndShaped) {
    auto a = scratch("sim_a"), b = scratch("sim_b");
    ASSERT_EQ(run({"simulate", "--out", p(a), "--seed", "9", "--currencies", "5", "--years", "1"}), 0);
    ASSERT_EQ(run({"simulate", "--out", p(b), "--seed", "9", "--currencies", "5", "--years", "1"}), 0);
    EXPECT_EQ(slurp(a / "panel.csv"), slurp(b / "panel.csv"));
    EXPECT_EQ(slurp(a / "truth.json"), slurp(b / "truth.json"));
    auto panel = carrytail::data::load_panel(a / "panel.csv");
    EXPECT_EQ(panel.num_currencies(), 5u);
    EXPECT_GT(panel.num_dates(), 250u);
    auto truth = nlohmann::json::parse(slurp(a / "truth.json"));
    EXPECT_EQ(truth["copula"]["mixture"].size(), 3u);
}

TEST(Cli, IndependenceSimulationIsUncorrelated) {
    auto d = scratch("sim_ind");
    ASSERT_EQ(run({"simulate", "--out", p(d), "--seed", "2", "--currencies", "4", "--years", "2", "--copula", "independence"}), 0);
    auto panel = carrytail::data::load_panel(d / "panel.csv");
    auto w = carrytail::data::extract_window(panel, panel.dates[500], 500, panel.currencies);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) {
            auto x = w.returns.column(a), y = w.returns.column(b);
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
            double sxy = 0, sxx = 0, syy = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sxy += (x[i] - mx) * (y[i] - my);
                sxx += (x[i] - mx) * (x[i] - mx);
                syy += (y[i] - my) * (y[i] - my);
            }
            EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.1);
        }
}

TEST(Cli, SimulateRejectsBadSpec) {
    auto d = scratch("sim_bad");
    std::ofstream(d / "spec.json") << R"({"family":"clayton","rho":-1})";
    EXPECT_EQ(run({"simulate", "--out", p(d), "--copula", p(d / "spec.json")}), 1);
    std::ofstream(d / "mix.json") << R"({"mixture":[{"family":"gumbel","rho":2,"lambda":0.7},{"family":"frank","rho":3,"lambda":0.7}]})";
    EXPECT_EQ(run({"simulate", "--out", p(d), "--copula", p(d / "mix.json")}), 1);
}

TEST(Cli, FitCopulasOutputsAndReproducibility) {
    const auto panel = small_panel() / "panel.csv";
    auto a = scratch("fit_all"), b = scratch("fit_all_again"), c = scratch("fit_single");
    ASSERT_EQ(run({"fit-copulas", "--input", p(panel), "--horizon", "126", "--stride", "60", "--model", "all", "--out", p(a)}), 0);
    for (const char* f : {"fits_cfg_126.jsonl", "fits_cg_126.jsonl", "fits_opc_126.jsonl", "aic_126.csv", "baskets.csv"})
        EXPECT_TRUE(fs::exists(a / f)) << f;
    auto aic = read_csv(a / "aic_126.csv");
    ASSERT_GT(aic.size(), 1u);
    EXPECT_EQ(aic[0][5], "aic_cg_minus_cfg");
    EXPECT_NEAR(std::stod(aic[1][5]), std::stod(aic[1][3]) - std::stod(aic[1][2]), 1e-9);

    ASSERT_EQ(run({"fit-copulas", "--input", p(panel), "--horizon", "126", "--stride", "60", "--model", "all", "--out", p(b),
                   "--threads", "2"}),
              0);
    EXPECT_EQ(slurp(a / "fits_cfg_126.jsonl"), slurp(b / "fits_cfg_126.jsonl"));

    ASSERT_EQ(run({"fit-copulas", "--input", p(panel), "--horizon", "126", "--stride", "60", "--model", "cg", "--out", p(c)}), 0);
    EXPECT_TRUE(fs::exists(c / "fits_cg_126.jsonl"));
    EXPECT_FALSE(fs::exists(c / "aic_126.csv"));

    auto fits = carrytail::io::read_fits_jsonl(a / "fits_cfg_126.jsonl");
    ASSERT_FALSE(fits.empty());
    for (const auto& f : fits) EXPECT_NEAR(f.aic, 10 - 2 * f.loglik, 1e-9);
    EXPECT_EQ(slurp(a / "fits_cfg_126.jsonl").substr(0, 14), R"({"provenance":)");
    EXPECT_EQ(slurp(a / "baskets.csv").substr(0, 13), "# provenance ");
}

TEST(Cli, AllWindowsFailing) {
    const auto panel = small_panel() / "panel.csv";
    auto d = scratch("fail_all");
    // a window is too short to leave any fit date
    EXPECT_EQ(run({"fit-copulas", "--input", p(panel), "--horizon", "400", "--out", p(d)}), 1);
}

TEST(Cli, TailDependenceClosedForms) {
    auto d = scratch("td");
    write_fits(d / "fits_cfg_126.jsonl",
               {R"({"mixture":[{"family":"gumbel","rho":2.0,"lambda":1.0}]})", R"({"mixture":[{"family":"frank","rho":4.0,"lambda":1.0}]})",
                R"({"mixture":[{"family":"gumbel","rho":2.0,"lambda":1.0}]})"},
               {"2020-03-02", "2020-01-02", "2020-02-03"});
    ASSERT_EQ(run({"tail-dependence", "--out", p(d), "--model", "cfg", "--horizon", "126"}), 0);
    auto rows = read_csv(d / "td_cfg_126.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"date", "basket", "upper_td", "lower_td"}));
    EXPECT_EQ(rows[1][0], "2020-01-02");
    EXPECT_EQ(rows[1][2], "0");
    EXPECT_EQ(rows[1][3], "0");
    // d = 3, h = 1: (3 - 3*2^(1/2) + 3^(1/2)) / (2 - 2^(1/2))
    const double g3 = (3 - 3 * std::sqrt(2.0) + std::sqrt(3.0)) / (2 - std::sqrt(2.0));
    EXPECT_NEAR(std::stod(rows[2][2]), g3, 1e-12);
    EXPECT_EQ(rows[2][0], "2020-02-03");
    EXPECT_EQ(rows[3][0], "2020-03-02");

    EXPECT_EQ(run({"tail-dependence", "--out", p(d), "--fits", p(d / "nope.jsonl")}), 1);
}

TEST(Cli, BacktestRulesAndZeroControl) {
    const auto panel = small_panel() / "panel.csv";
    auto fit = scratch("bt_fit");
    ASSERT_EQ(run({"fit-copulas", "--input", p(panel), "--horizon", "126", "--stride", "21", "--model", "cg", "--out", p(fit)}), 0);
    ASSERT_EQ(run({"tail-dependence", "--out", p(fit), "--model", "cg", "--horizon", "126"}), 0);
    const auto td = p(fit / "td_cg_126.csv");

    auto prod = scratch("bt_prod"), mx = scratch("bt_max"), zero = scratch("bt_zero");
    ASSERT_EQ(run({"backtest", "--input", p(panel), "--td", td, "--out", p(prod)}), 0);
    ASSERT_EQ(run({"backtest", "--input", p(panel), "--td", td, "--out", p(mx), "--adjust-rule", "max"}), 0);
    ASSERT_EQ(run({"backtest", "--input", p(panel), "--td", td, "--out", p(zero), "--zero-td"}), 0);
    EXPECT_NE(slurp(prod / "adjusted.csv"), slurp(mx / "adjusted.csv"));

    auto rows = read_csv(prod / "adjusted.csv");
    ASSERT_GT(rows.size(), 2u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double raw = std::stod(rows[i][1]), down = std::stod(rows[i][2]), up = std::stod(rows[i][3]);
        EXPECT_LE(std::abs(down), std::abs(raw));
        EXPECT_LE(std::abs(raw), std::abs(up));
    }
    const auto zrows = read_csv(zero / "adjusted.csv");
    for (std::size_t i = 1; i < zrows.size(); ++i) {
        EXPECT_EQ(zrows[i][1], zrows[i][2]);
        EXPECT_EQ(zrows[i][1], zrows[i][3]);
    }
    auto summary = nlohmann::json::parse(slurp(prod / "summary.json"));
    EXPECT_TRUE(summary.contains("raw"));
    EXPECT_TRUE(summary["raw"].contains("sd"));

    EXPECT_EQ(run({"backtest", "--input", p(panel), "--td", p(fit / "missing.csv"), "--out", p(prod)}), 1);
    EXPECT_EQ(run({"backtest", "--input", p(panel), "--td", td, "--out", p(prod), "--adjust-rule", "min"}), 1);
}

TEST(Cli, FitMarginalsRejectionTable) {
    auto sim = scratch("fm_sim"), out = scratch("fm_out");
    ASSERT_EQ(run({"simulate", "--out", p(sim), "--seed", "5", "--currencies", "3", "--years", "2", "--copula", "independence",
                   "--margin-k", "0.3", "--margin-b", "0.01"}),
              0);
    ASSERT_EQ(run({"fit-marginals", "--input", p(sim / "panel.csv"), "--horizon", "252", "--stride", "60", "--out", p(out)}), 0);
    auto rows = read_csv(out / "ks_rejections_252.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"currency", "windows", "lggd_reject_prop", "lognormal_reject_prop"}));
    double lognormal = 0, lggd = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        lggd += std::stod(rows[i][2]);
        lognormal += std::stod(rows[i][3]);
    }
    EXPECT_GT(lognormal, lggd);
    EXPECT_GT(lognormal / 3, 0.5);
    EXPECT_TRUE(fs::exists(out / "marginals_252.jsonl"));
}

TEST(Cli, KGridParsing) {
    auto g = carrytail::cli::parse_k_grid("0.5:50:5");
    ASSERT_EQ(g.size(), 5u);
    EXPECT_NEAR(g[2], 5.0, 1e-12);
    EXPECT_ANY_THROW(carrytail::cli::parse_k_grid("1:2"));
    EXPECT_ANY_THROW(carrytail::cli::parse_k_grid("a:b:c"));
}
