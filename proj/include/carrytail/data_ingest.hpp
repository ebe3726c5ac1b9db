#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carrytail/date.hpp"
#include "carrytail/matrix.hpp"

namespace carrytail::data {

/// Aligned daily spot and 1-month forward quotes (currency per USD), date x currency.
///
/// Missing prices are NaN. A cell is available when both prices are present and the
/// currency is not excluded on that date. Panels are immutable values; every operation
/// below returns a new panel.
struct QuotePanel {
    std::vector<Date> dates;
    std::vector<std::string> currencies;
    Matrix spot;
    Matrix forward1m;
    std::vector<std::uint8_t> excluded;   // date-major, same shape as spot
    std::vector<std::uint8_t> available;  // derived: prices present && !excluded

    std::size_t num_dates() const { return dates.size(); }
    std::size_t num_currencies() const { return currencies.size(); }
    bool is_available(std::size_t t, std::size_t c) const { return available[t * currencies.size() + c] != 0; }

    std::optional<std::size_t> date_index(const Date& d) const;
    std::optional<std::size_t> currency_index(const std::string& code) const;
    std::vector<std::string> available_currencies(std::size_t t) const;

    /// Recomputes the availability mask from prices and exclusions.
    void refresh_availability();
};

struct ExclusionRule {
    std::string currency;
    std::optional<Date> from_date;
    std::optional<Date> to_date;
    std::string reason;
};

struct LogReturnWindow {
    Date end_date;
    int horizon_days = 0;
    std::vector<std::string> currencies;
    Matrix returns;  // horizon_days x currencies
};

/// Reads `date,currency,spot,forward_1m` rows. Lines starting with '#' are comments.
/// Empty price fields are treated as missing.
QuotePanel load_panel(const std::filesystem::path& csv_path);
QuotePanel parse_panel(std::istream& in, const std::string& source_name = "<stream>");

/// Builds a panel from parallel arrays (used by the simulator and tests).
QuotePanel make_panel(std::vector<Date> dates, std::vector<std::string> currencies, Matrix spot, Matrix forward1m);

/// Reads `currency,from_date,to_date,reason`; empty dates are unbounded.
std::vector<ExclusionRule> load_exclusions(const std::filesystem::path& csv_path);

/// Carries the last observed price forward per series; leading gaps stay missing.
QuotePanel forward_fill(const QuotePanel& panel);

QuotePanel apply_exclusions(const QuotePanel& panel, const std::vector<ExclusionRule>& rules);

/// Forward/spot ratio per available currency on `date`.
std::map<std::string, double> carry_signal(const QuotePanel& panel, const Date& date);

/// Log returns ln(F_t / F_{t-1}) of the forward price over the `horizon_days` trading
/// days ending at `end_date`.
LogReturnWindow extract_window(const QuotePanel& panel, const Date& end_date, int horizon_days,
                               const std::vector<std::string>& currencies);

void write_panel_csv(const QuotePanel& panel, std::ostream& out);

}  // namespace carrytail::data
