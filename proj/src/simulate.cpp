#include "carrytail/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include <boost/math/special_functions/digamma.hpp>

#include "carrytail/error.hpp"
#include "carrytail/serialization.hpp"

namespace carrytail::sim {

SimulationConfig::SimulationConfig() : copula(default_truth_copula()), margin(zero_mean_lggd(2.0, 0.006)) {}

copula::MixtureSpec default_truth_copula() {
    using copula::CopulaSpec;
    return {{{CopulaSpec::clayton(2.0), 0.4}, {CopulaSpec::frank(3.0), 0.2}, {CopulaSpec::gumbel(2.0), 0.4}}};
}

marginals::LggdParams zero_mean_lggd(double k, double b) { return {k, -b * boost::math::digamma(k), b}; }

std::vector<Date> weekday_calendar(const Date& start, int years) {
    using namespace std::chrono;
    if (years < 1) throw InputError("simulation needs at least one year");
    const auto ymd = start.ymd();
    const Date end{sys_days{year_month_day{ymd.year() + std::chrono::years{years}, ymd.month(), ymd.day()}}};
    std::vector<Date> out;
    for (Date d = start; d < end; d = d + 1)
        if (d.is_weekday()) out.push_back(d);
    return out;
}

std::vector<std::string> currency_codes(int n) {
    static const char* kCodes[] = {"AUD", "BRL", "CAD", "CHF", "CLP", "CNY", "CZK", "DKK", "EUR", "GBP",
                                   "HUF", "IDR", "ILS", "INR", "JPY", "KRW", "MXN", "NOK", "NZD", "PHP",
                                   "PLN", "SEK", "SGD", "THB", "TRY", "TWD", "ZAR"};
    constexpr int kNamed = static_cast<int>(std::size(kCodes));
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        if (n <= kNamed) {
            out.emplace_back(kCodes[i]);
        } else {
            char buf[16];
            std::snprintf(buf, sizeof buf, "X%02d", i);
            out.emplace_back(buf);
        }
    }
    return out;
}

Simulation simulate_panel(const SimulationConfig& cfg) {
    if (cfg.n_currencies < 2) throw InputError("simulation needs at least two currencies");
    cfg.copula.validate();
    cfg.margin.validate();
    const auto dates = weekday_calendar(cfg.start, cfg.years);
    const auto codes = currency_codes(cfg.n_currencies);
    const std::size_t n = dates.size(), d = codes.size();

    const auto u = copula::sample(cfg.copula, n, d, cfg.seed);
    std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
    std::normal_distribution<double> noise(0.0, cfg.diff_noise);

    Simulation s;
    for (std::size_t j = 0; j < d; ++j)
        s.differentials.push_back(d == 1 ? cfg.diff_low
                                         : cfg.diff_low + (cfg.diff_high - cfg.diff_low) * static_cast<double>(j) /
                                                              static_cast<double>(d - 1));
    Matrix spot(n, d), fwd(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        double log_f = std::log(1.0 + 0.25 * static_cast<double>(j));
        for (std::size_t t = 0; t < n; ++t) {
            if (t > 0) log_f += marginals::lggd_quantile(u(t, j), cfg.margin);
            fwd(t, j) = std::exp(log_f);
            spot(t, j) = std::exp(log_f + (s.differentials[j] + noise(rng)) / 12.0);
        }
    }
    s.panel = data::make_panel(dates, codes, std::move(spot), std::move(fwd));
    return s;
}

nlohmann::json truth_json(const SimulationConfig& cfg, const Simulation& s) {
    nlohmann::json diffs = nlohmann::json::object();
    for (std::size_t j = 0; j < s.panel.currencies.size(); ++j) diffs[s.panel.currencies[j]] = s.differentials[j];
    return {{"seed", cfg.seed},
            {"n_currencies", cfg.n_currencies},
            {"n_days", s.panel.num_dates()},
            {"start", cfg.start.iso()},
            {"copula", io::to_json(cfg.copula)},
            {"marginal", io::to_json(cfg.margin)},
            {"differentials", diffs}};
}

}  // namespace carrytail::sim
