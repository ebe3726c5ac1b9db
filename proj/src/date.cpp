#include "carrytail/date.hpp"

#include <charconv>
#include <cstdio>

#include "carrytail/error.hpp"

namespace carrytail {

Date::Date(int y, unsigned m, unsigned d) {
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw InputError("invalid calendar date");
    days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
    auto bad = [&] { return InputError("invalid ISO date '" + std::string(iso) + "'"); };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
        if (ec != std::errc{} || p != iso.data() + pos + len) throw bad();
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw bad();
    return Date{std::chrono::sys_days{ymd}};
}

std::string Date::iso() const {
    const auto v = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                  static_cast<unsigned>(v.day()));
    return buf;
}

bool Date::is_weekday() const {
    const std::chrono::weekday w{days_};
    return w != std::chrono::Saturday && w != std::chrono::Sunday;
}

}  // namespace carrytail
