#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "carrytail/copula.hpp"
#include "carrytail/data_ingest.hpp"
#include "carrytail/date.hpp"
#include "carrytail/marginals.hpp"

namespace carrytail::sim {

struct SimulationConfig {
    int n_currencies = 25;
    int years = 3;
    Date start{2010, 1, 4};
    copula::MixtureSpec copula;         // empty: CFG rho=(2,3,2), lambda=(0.4,0.2,0.4)
    marginals::LggdParams margin;       // default: k=2, b=0.006, u giving zero mean
    double diff_low = -0.04;            // annual r_f - r_usd, spread linearly across currencies
    double diff_high = 0.08;
    double diff_noise = 0.002;
    std::uint64_t seed = 1;

    SimulationConfig();
};

copula::MixtureSpec default_truth_copula();
marginals::LggdParams zero_mean_lggd(double k, double b);

/// Weekdays in [start, start + years).
std::vector<Date> weekday_calendar(const Date& start, int years);
std::vector<std::string> currency_codes(int n);

struct Simulation {
    data::QuotePanel panel;
    std::vector<double> differentials;
};

/// Forward log returns follow the copula with l.g.g.d. margins; spot = forward * exp(diff/12).
Simulation simulate_panel(const SimulationConfig& cfg);
nlohmann::json truth_json(const SimulationConfig& cfg, const Simulation& s);

}  // namespace carrytail::sim
