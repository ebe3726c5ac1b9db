#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "carrytail/carry_portfolio.hpp"
#include "carrytail/error.hpp"
#include "carrytail/simulate.hpp"

using namespace carrytail;
using namespace carrytail::portfolio;

namespace {

// One date, n currencies with F/S ratios given.
data::QuotePanel ratio_panel(const std::vector<double>& ratios, std::vector<std::string> codes = {}) {
    if (codes.empty())
        for (std::size_t i = 0; i < ratios.size(); ++i) codes.push_back("C" + std::string(i < 10 ? "0" : "") + std::to_string(i));
    Matrix spot(1, ratios.size(), 1.0), fwd(1, ratios.size());
    for (std::size_t i = 0; i < ratios.size(); ++i) fwd(0, i) = ratios[i];
    return data::make_panel({Date(2020, 1, 2)}, codes, spot, fwd);
}

td::TailDependenceSeries flat_td(const std::string& side, std::vector<Date> dates, double up, double lo) {
    td::TailDependenceSeries s;
    s.basket_side = side;
    s.dates = std::move(dates);
    s.dims.assign(s.dates.size(), 2);
    s.upper.assign(s.dates.size(), up);
    s.lower.assign(s.dates.size(), lo);
    return s;
}

}  // namespace

TEST(Baskets, SizeRule) {
    EXPECT_EQ(basket_size(25), 5);
    EXPECT_EQ(basket_size(10), 2);
    EXPECT_EQ(basket_size(4), 2);
    EXPECT_EQ(basket_size(12), 2);
    EXPECT_EQ(basket_size(13), 3);
    EXPECT_EQ(basket_size(22), 4);
    EXPECT_EQ(basket_size(33), 6);
    EXPECT_EQ(basket_size(200), 6);
}

TEST(Baskets, HighRateBasketHasSmallestRatios) {
    std::vector<double> r(25);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = 0.99 + 0.001 * double((i * 7) % 25);
    auto p = ratio_panel(r);
    auto b = build_baskets(p, Date(2020, 1, 2));
    ASSERT_EQ(b.high_ir.size(), 5u);
    ASSERT_EQ(b.low_ir.size(), 5u);
    auto sig = data::carry_signal(p, Date(2020, 1, 2));
    double max_high = 0, min_low = 10;
    for (const auto& c : b.high_ir) max_high = std::max(max_high, sig[c]);
    for (const auto& c : b.low_ir) min_low = std::min(min_low, sig[c]);
    EXPECT_NEAR(max_high, 0.994, 1e-12);
    EXPECT_NEAR(min_low, 1.010, 1e-12);
    EXPECT_EQ(build_baskets(p, Date(2020, 1, 2)).high_ir, b.high_ir);
}

TEST(Baskets, TiesAndSmallPanels) {
    auto p = ratio_panel({0.9, 0.95, 0.95, 1.0, 1.0, 1.02, 1.03, 1.05, 1.05, 1.05}, {"J", "B", "A", "K", "L", "M", "N", "Z", "Y", "X"});
    auto b = build_baskets(p, Date(2020, 1, 2));
    EXPECT_EQ(b.high_ir, (std::vector<std::string>{"A", "J"}));
    EXPECT_EQ(b.low_ir, (std::vector<std::string>{"X", "Y"}));

    auto all_equal = build_baskets(ratio_panel({1, 1, 1, 1}, {"D", "C", "B", "A"}), Date(2020, 1, 2));
    std::set<std::string> seen(all_equal.high_ir.begin(), all_equal.high_ir.end());
    seen.insert(all_equal.low_ir.begin(), all_equal.low_ir.end());
    EXPECT_EQ(seen.size(), 4u);
    EXPECT_EQ(all_equal.high_ir, (std::vector<std::string>{"A", "B"}));

    EXPECT_THROW(build_baskets(ratio_panel({1.0, 1.1, 1.2}), Date(2020, 1, 2)), InputError);
}

TEST(Rolling, FitDatesAndStrideSubset) {
    sim::SimulationConfig cfg;
    cfg.n_currencies = 4;
    cfg.years = 2;
    auto panel = sim::simulate_panel(cfg).panel;
    const auto every = fit_dates(panel, 126, 1);
    const auto monthly = fit_dates(panel, 126, 21);
    EXPECT_EQ(every.front(), panel.dates[126]);
    EXPECT_EQ(monthly.size(), (panel.num_dates() - 126 + 20) / 21);
    for (const auto& d : monthly) EXPECT_TRUE(std::binary_search(every.begin(), every.end(), d));
    EXPECT_THROW(fit_dates(panel, 126, 0), InputError);
    EXPECT_NE(window_seed(1, Date(2020, 1, 2), "high_ir"), window_seed(1, Date(2020, 1, 2), "low_ir"));
    EXPECT_EQ(window_seed(1, Date(2020, 1, 2), "high_ir"), window_seed(1, Date(2020, 1, 2), "high_ir"));
}

TEST(Rolling, FitsBothSidesAndSkipsShortHistory) {
    sim::SimulationConfig cfg;
    cfg.n_currencies = 8;
    cfg.years = 1;
    cfg.seed = 4;
    auto panel = sim::simulate_panel(cfg).panel;
    // first currency starts late
    for (std::size_t t = 0; t < 150; ++t) panel.spot(t, 0) = panel.forward1m(t, 0) = NAN;
    panel.refresh_availability();

    RollingOptions opts;
    opts.horizon_days = 100;
    opts.stride = 60;
    opts.models = {estimation::Model::CG, estimation::Model::OPC};
    opts.stage2.random_starts = 1;
    auto res = rolling_fit(panel, opts);
    ASSERT_EQ(res.fits.size(), 2u);
    const auto dates = fit_dates(panel, 100, 60);
    EXPECT_EQ(res.windows_attempted, dates.size() * 2);
    EXPECT_EQ(res.fits[0].size() + res.skipped.size(), dates.size() * 2);
    EXPECT_FALSE(res.skipped.empty());
    for (const auto& s : res.skipped) EXPECT_NE(s.reason.find("insufficient history"), std::string::npos);
    for (std::size_t i = 0; i < res.fits[0].size(); ++i) {
        EXPECT_EQ(res.fits[0][i].end_date, res.fits[1][i].end_date);
        EXPECT_EQ(res.fits[0][i].basket.size(), 2u);
        EXPECT_TRUE(res.fits[0][i].side == "high_ir" || res.fits[0][i].side == "low_ir");
    }

    opts.threads = 3;
    auto par = rolling_fit(panel, opts);
    ASSERT_EQ(par.fits[0].size(), res.fits[0].size());
    for (std::size_t i = 0; i < par.fits[0].size(); ++i) {
        EXPECT_EQ(par.fits[0][i].mixture, res.fits[0][i].mixture);
        EXPECT_EQ(par.fits[0][i].loglik, res.fits[0][i].loglik);
    }
}

TEST(Returns, MonthEnds) {
    std::vector<Date> d{Date(2020, 1, 30), Date(2020, 1, 31), Date(2020, 2, 3), Date(2020, 2, 28), Date(2020, 3, 2)};
    auto p = data::make_panel(d, {"A", "B"}, Matrix(5, 2, 1.0), Matrix(5, 2, 1.0));
    EXPECT_EQ(month_ends(p), (std::vector<Date>{Date(2020, 1, 31), Date(2020, 2, 28), Date(2020, 3, 2)}));
}

TEST(Returns, UipNullAndLogArithmetic) {
    // four currencies, three month ends; spot at settlement equals the earlier forward
    std::vector<Date> d{Date(2020, 1, 31), Date(2020, 2, 28), Date(2020, 3, 31)};
    Matrix spot(3, 4), fwd(3, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        spot(0, j) = 1.0 + 0.1 * j;
        fwd(0, j) = spot(0, j) * (0.98 + 0.01 * j);
        for (std::size_t t = 1; t < 3; ++t) {
            spot(t, j) = fwd(t - 1, j);
            fwd(t, j) = spot(t, j) * (0.98 + 0.01 * j);
        }
    }
    auto p = data::make_panel(d, {"A", "B", "C", "D"}, spot, fwd);
    auto r = carry_returns(p, d);
    ASSERT_EQ(r.dates.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(r.high_leg[i], 0.0, 1e-15);
        EXPECT_NEAR(r.hml[i], 0.0, 1e-15);
    }

    for (std::size_t t = 1; t < 3; ++t)
        for (std::size_t j = 0; j < 4; ++j) spot(t, j) = fwd(t - 1, j) * std::exp(j < 2 ? -0.01 : 0.02);
    auto q = data::make_panel(d, {"A", "B", "C", "D"}, spot, fwd);
    auto s = carry_returns(q, d);
    EXPECT_NEAR(s.high_leg[0], 0.01, 1e-14);
    EXPECT_NEAR(s.low_leg[0], -0.02, 1e-14);
    EXPECT_EQ(s.hml[0], s.high_leg[0] - s.low_leg[0]);

    Matrix gap = spot;
    gap(2, 0) = NAN;
    auto g = data::make_panel(d, {"A", "B", "C", "D"}, gap, fwd);
    EXPECT_THROW(carry_returns(g, d), InputError);
}

TEST(Adjust, RuleArithmetic) {
    CarryReturns r;
    r.dates = {Date(2020, 1, 31), Date(2020, 2, 28)};
    r.hml = {0.02, -0.01};
    r.high_leg = r.hml;
    r.low_leg = {0, 0};
    auto hi = flat_td("high_ir", {Date(2020, 1, 15)}, 0.5, 0.3);
    auto lo = flat_td("low_ir", {Date(2020, 1, 15)}, 1.0, 0.5);
    auto a = adjust_returns(r, hi, lo);
    EXPECT_NEAR(a.downside_adj[0], 0.02 * 0.5 * 0.5, 1e-17);
    EXPECT_NEAR(a.upside_adj[0], 2 * (1 + 0.3) * 0.02, 1e-17);
    EXPECT_NEAR(a.cum_down[1], a.downside_adj[0] + a.downside_adj[1], 1e-17);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LE(std::abs(a.downside_adj[i]), std::abs(a.raw[i]));
        EXPECT_LE(std::abs(a.raw[i]), std::abs(a.upside_adj[i]));
    }
    auto m = adjust_returns(r, hi, lo, AdjustRule::Max);
    EXPECT_NEAR(m.downside_adj[0], 0.02 * 0.5, 1e-17);
    EXPECT_NEAR(m.upside_adj[0], 0.02 * 2.0, 1e-17);

    auto z = adjust_returns(r, flat_td("high_ir", {Date(2020, 1, 1)}, 0, 0), flat_td("low_ir", {Date(2020, 1, 1)}, 0, 0));
    EXPECT_EQ(z.downside_adj, z.raw);
    EXPECT_EQ(z.upside_adj, z.raw);
}

TEST(Adjust, Errors) {
    CarryReturns r;
    r.dates = {Date(2020, 1, 31)};
    r.hml = r.high_leg = {0.01};
    r.low_leg = {0};
    try {
        adjust_returns(r, flat_td("high_ir", {Date(2020, 2, 5)}, 0.1, 0.1), flat_td("low_ir", {Date(2020, 1, 5)}, 0.1, 0.1));
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("2020-01-31"), std::string::npos);
    }
    EXPECT_THROW(adjust_returns(r, flat_td("high_ir", {Date(2020, 1, 5)}, 1.2, 0.1), flat_td("low_ir", {Date(2020, 1, 5)}, 0.1, 0.1)),
                 InputError);
    EXPECT_THROW(parse_adjust_rule("min"), InputError);
}
