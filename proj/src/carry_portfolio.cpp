#include "carrytail/carry_portfolio.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "carrytail/error.hpp"
#include "carrytail/marginals.hpp"

namespace carrytail::portfolio {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::size_t index_of(const data::QuotePanel& panel, const Date& date) {
    const auto t = panel.date_index(date);
    if (!t) throw InputError("date " + date.iso() + " is not in the panel");
    return *t;
}

struct Job {
    Date date;
    std::string side;
    std::vector<std::string> basket;
};

struct JobResult {
    std::vector<estimation::WindowFit> fits;  // one per model, empty on failure
    std::string error;
};

}  // namespace

int basket_size(std::size_t n) {
    const int r = static_cast<int>((n + 2) / 5);  // round half up of n/5
    return std::clamp(r, 2, 6);
}

BasketSnapshot build_baskets(const data::QuotePanel& panel, const Date& date) {
    const auto ratios = data::carry_signal(panel, date);
    if (ratios.size() < 4)
        throw InputError("need at least 4 available currencies to form baskets on " + date.iso() + ", have " +
                         std::to_string(ratios.size()));
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [c, r] : ratios) ranked.emplace_back(r, c);
    std::sort(ranked.begin(), ranked.end());

    const auto m = static_cast<std::size_t>(basket_size(ranked.size()));
    BasketSnapshot b;
    b.date = date;
    for (std::size_t i = 0; i < m; ++i) b.high_ir.push_back(ranked[i].second);

    // Largest ratios; ties at the boundary still go to the smaller code.
    std::vector<std::pair<double, std::string>> desc(ranked.begin(), ranked.end());
    std::stable_sort(desc.begin(), desc.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    for (const auto& [r, c] : desc) {
        if (b.low_ir.size() == m) break;
        if (std::find(b.high_ir.begin(), b.high_ir.end(), c) == b.high_ir.end()) b.low_ir.push_back(c);
    }
    std::sort(b.high_ir.begin(), b.high_ir.end());
    std::sort(b.low_ir.begin(), b.low_ir.end());
    return b;
}

std::vector<Date> fit_dates(const data::QuotePanel& panel, int horizon_days, int stride) {
    if (horizon_days < 1) throw InputError("horizon must be positive");
    if (stride < 1) throw InputError("stride must be positive");
    std::vector<Date> out;
    for (std::size_t t = static_cast<std::size_t>(horizon_days); t < panel.num_dates(); t += static_cast<std::size_t>(stride))
        out.push_back(panel.dates[t]);
    return out;
}

std::uint64_t window_seed(std::uint64_t base, const Date& date, const std::string& side) {
    std::uint64_t h = splitmix(base ^ static_cast<std::uint64_t>(date.serial()));
    for (char c : side) h = splitmix(h ^ static_cast<unsigned char>(c));
    return h;
}

RollingFitResult rolling_fit(const data::QuotePanel& panel, const RollingOptions& opts) {
    if (opts.models.empty()) throw InputError("no models requested");
    const auto grid = opts.k_grid.empty() ? marginals::default_k_grid() : opts.k_grid;

    RollingFitResult res;
    res.fits.resize(opts.models.size());
    std::vector<Job> jobs;
    for (const auto& date : fit_dates(panel, opts.horizon_days, opts.stride)) {
        try {
            auto b = build_baskets(panel, date);
            jobs.push_back({date, "high_ir", b.high_ir});
            jobs.push_back({date, "low_ir", b.low_ir});
            res.baskets.push_back(std::move(b));
        } catch (const InputError& e) {
            res.skipped.push_back({date, "both", e.what()});
        }
    }
    res.windows_attempted = jobs.size() + res.skipped.size() * 2;

    std::vector<JobResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const auto& job = jobs[j];
            try {
                const auto window = data::extract_window(panel, job.date, opts.horizon_days, job.basket);
                const auto pseudo = estimation::stage1_fit(window, grid);
                auto s2 = opts.stage2;
                s2.seed = window_seed(opts.stage2.seed, job.date, job.side);
                for (auto m : opts.models) {
                    auto fit = estimation::stage2_fit(pseudo, m, s2);
                    fit.side = job.side;
                    results[j].fits.push_back(std::move(fit));
                }
            } catch (const std::exception& e) {
                results[j].fits.clear();
                results[j].error = e.what();
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!results[j].error.empty()) {
            res.skipped.push_back({jobs[j].date, jobs[j].side, results[j].error});
            continue;
        }
        for (std::size_t m = 0; m < opts.models.size(); ++m) res.fits[m].push_back(std::move(results[j].fits[m]));
    }
    std::stable_sort(res.skipped.begin(), res.skipped.end(),
                     [](const SkippedWindow& a, const SkippedWindow& b) { return a.date < b.date; });
    return res;
}

std::vector<Date> month_ends(const data::QuotePanel& panel) {
    std::vector<Date> out;
    for (std::size_t t = 0; t < panel.num_dates(); ++t) {
        const auto ym = panel.dates[t].ymd();
        const bool last = t + 1 == panel.num_dates() || panel.dates[t + 1].ymd().month() != ym.month() ||
                          panel.dates[t + 1].ymd().year() != ym.year();
        if (last) out.push_back(panel.dates[t]);
    }
    return out;
}

CarryReturns carry_returns(const data::QuotePanel& panel, const std::vector<Date>& monthly_dates) {
    CarryReturns out;
    auto leg = [&](const std::vector<std::string>& basket, std::size_t t0, std::size_t t1, const Date& settle) {
        double s = 0.0;
        for (const auto& c : basket) {
            const auto j = *panel.currency_index(c);
            const double f = panel.forward1m(t0, j);
            const double spot = panel.spot(t1, j);
            if (!std::isfinite(spot) || spot <= 0.0)
                throw InputError("missing settlement spot for " + c + " on " + settle.iso());
            s += std::log(f / spot);
        }
        return s / static_cast<double>(basket.size());
    };
    for (std::size_t i = 0; i + 1 < monthly_dates.size(); ++i) {
        const auto t0 = index_of(panel, monthly_dates[i]);
        const auto t1 = index_of(panel, monthly_dates[i + 1]);
        if (t1 <= t0) throw InputError("monthly dates must be strictly increasing");
        const auto b = build_baskets(panel, monthly_dates[i]);
        const double hi = leg(b.high_ir, t0, t1, monthly_dates[i + 1]);
        const double lo = leg(b.low_ir, t0, t1, monthly_dates[i + 1]);
        out.dates.push_back(monthly_dates[i]);
        out.high_leg.push_back(hi);
        out.low_leg.push_back(lo);
        out.hml.push_back(hi - lo);
    }
    return out;
}

AdjustRule parse_adjust_rule(std::string_view s) {
    if (s == "product") return AdjustRule::Product;
    if (s == "max") return AdjustRule::Max;
    throw InputError("unknown adjust rule '" + std::string(s) + "', expected product or max");
}

AdjustedReturns adjust_returns(const CarryReturns& returns, const td::TailDependenceSeries& high_td,
                               const td::TailDependenceSeries& low_td, AdjustRule rule) {
    auto lookup = [](const td::TailDependenceSeries& s, const Date& d) {
        const auto it = std::upper_bound(s.dates.begin(), s.dates.end(), d);
        if (it == s.dates.begin())
            throw InputError("no " + s.basket_side + " tail dependence on or before " + d.iso());
        const auto k = static_cast<std::size_t>(it - s.dates.begin()) - 1;
        const double up = s.upper[k], lo = s.lower[k];
        if (!(up >= 0.0 && up <= 1.0 && lo >= 0.0 && lo <= 1.0))
            throw InputError(s.basket_side + " tail dependence outside [0,1] on " + s.dates[k].iso());
        return std::pair{up, lo};
    };
    for (const auto* s : {&high_td, &low_td})
        if (!std::is_sorted(s->dates.begin(), s->dates.end())) throw InputError("tail dependence series not date-sorted");

    AdjustedReturns out;
    double cr = 0.0, cd = 0.0, cu = 0.0;
    for (std::size_t i = 0; i < returns.dates.size(); ++i) {
        const auto [up_h, lo_h] = lookup(high_td, returns.dates[i]);
        const auto [up_l, lo_l] = lookup(low_td, returns.dates[i]);
        const double raw = returns.hml[i];
        double down = 0.0, upside = 0.0;
        if (rule == AdjustRule::Product) {
            down = raw * (1.0 - up_h) * (1.0 - lo_l);
            upside = raw * (1.0 + lo_h) * (1.0 + up_l);
        } else {
            down = raw * (1.0 - std::max(up_h, lo_l));
            upside = raw * (1.0 + std::max(lo_h, up_l));
        }
        out.dates.push_back(returns.dates[i]);
        out.raw.push_back(raw);
        out.downside_adj.push_back(down);
        out.upside_adj.push_back(upside);
        out.cum_raw.push_back(cr += raw);
        out.cum_down.push_back(cd += down);
        out.cum_up.push_back(cu += upside);
    }
    return out;
}

}  // namespace carrytail::portfolio
