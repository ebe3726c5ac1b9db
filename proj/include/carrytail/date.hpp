#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace carrytail {

/// Calendar date with day resolution. Thin value wrapper over sys_days.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    Date(int y, unsigned m, unsigned d);

    /// Parses YYYY-MM-DD; throws InputError on anything else.
    static Date parse(std::string_view iso);

    std::string iso() const;
    std::chrono::sys_days sys() const { return days_; }
    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    int serial() const { return days_.time_since_epoch().count(); }
    bool is_weekday() const;

    Date operator+(int n) const { return Date{days_ + std::chrono::days{n}}; }
    int operator-(const Date& o) const { return (days_ - o.days_).count(); }

    auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace carrytail
