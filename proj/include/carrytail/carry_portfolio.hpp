#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "carrytail/data_ingest.hpp"
#include "carrytail/date.hpp"
#include "carrytail/estimation.hpp"
#include "carrytail/tail_dependence.hpp"

namespace carrytail::portfolio {

/// round-half-up(n / 5), clipped to [2, 6].
int basket_size(std::size_t n_available);

struct BasketSnapshot {
    Date date;
    std::vector<std::string> high_ir;  // smallest F/S ratios
    std::vector<std::string> low_ir;   // largest F/S ratios
};

BasketSnapshot build_baskets(const data::QuotePanel& panel, const Date& date);

struct RollingOptions {
    int horizon_days = 126;
    int stride = 21;
    std::vector<estimation::Model> models{estimation::Model::CFG};
    std::vector<double> k_grid;  // empty: marginals::default_k_grid()
    estimation::Stage2Options stage2;
    unsigned threads = 1;
};

struct SkippedWindow {
    Date date;
    std::string side;
    std::string reason;
};

struct RollingFitResult {
    std::vector<BasketSnapshot> baskets;
    /// fits[m] holds the fits of options.models[m], date order, high_ir before low_ir.
    std::vector<std::vector<estimation::WindowFit>> fits;
    std::vector<SkippedWindow> skipped;
    std::size_t windows_attempted = 0;
};

/// Fit dates: trading-day indices horizon, horizon + stride, ...
std::vector<Date> fit_dates(const data::QuotePanel& panel, int horizon_days, int stride);

/// Per-window seed, independent of scheduling.
std::uint64_t window_seed(std::uint64_t base, const Date& date, const std::string& side);

RollingFitResult rolling_fit(const data::QuotePanel& panel, const RollingOptions& opts);

/// Last trading day of each calendar month in the panel.
std::vector<Date> month_ends(const data::QuotePanel& panel);

struct CarryReturns {
    std::vector<Date> dates;  // formation dates; each position settles at the next monthly date
    std::vector<double> high_leg;
    std::vector<double> low_leg;
    std::vector<double> hml;
};

/// Equal-weighted ln(F_t / S_{t+1m}) per basket; hml = high - low.
CarryReturns carry_returns(const data::QuotePanel& panel, const std::vector<Date>& monthly_dates);

enum class AdjustRule { Product, Max };
AdjustRule parse_adjust_rule(std::string_view s);

struct AdjustedReturns {
    std::vector<Date> dates;
    std::vector<double> raw;
    std::vector<double> downside_adj;
    std::vector<double> upside_adj;
    std::vector<double> cum_raw;
    std::vector<double> cum_down;
    std::vector<double> cum_up;
};

/// Each return date uses the latest TD point on or before it.
AdjustedReturns adjust_returns(const CarryReturns& returns, const td::TailDependenceSeries& high_td,
                               const td::TailDependenceSeries& low_td, AdjustRule rule = AdjustRule::Product);

}  // namespace carrytail::portfolio
