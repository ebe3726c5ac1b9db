#include "carrytail/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "carrytail/error.hpp"

namespace carrytail::data {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

std::string where(const std::string& source, std::size_t line_no) {
    return source + ":" + std::to_string(line_no) + ": ";
}

double parse_price(const std::string& field, const std::string& what, const std::string& loc) {
    if (field.empty()) return kMissing;
    double v = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size())
        throw InputError(loc + "cannot parse " + what + " '" + field + "'");
    if (!std::isfinite(v) || v <= 0.0) throw InputError(loc + "non-positive " + what + " '" + field + "'");
    return v;
}

}  // namespace

std::optional<std::size_t> QuotePanel::date_index(const Date& d) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - dates.begin());
}

std::optional<std::size_t> QuotePanel::currency_index(const std::string& code) const {
    auto it = std::find(currencies.begin(), currencies.end(), code);
    if (it == currencies.end()) return std::nullopt;
    return static_cast<std::size_t>(it - currencies.begin());
}

std::vector<std::string> QuotePanel::available_currencies(std::size_t t) const {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < currencies.size(); ++c)
        if (is_available(t, c)) out.push_back(currencies[c]);
    return out;
}

void QuotePanel::refresh_availability() {
    const std::size_t n = dates.size() * currencies.size();
    available.assign(n, 0);
    if (excluded.size() != n) excluded.assign(n, 0);
    for (std::size_t t = 0; t < dates.size(); ++t) {
        for (std::size_t c = 0; c < currencies.size(); ++c) {
            const std::size_t i = t * currencies.size() + c;
            available[i] = !excluded[i] && std::isfinite(spot(t, c)) && std::isfinite(forward1m(t, c));
        }
    }
}

QuotePanel make_panel(std::vector<Date> dates, std::vector<std::string> currencies, Matrix spot, Matrix forward1m) {
    if (spot.rows() != dates.size() || spot.cols() != currencies.size() || forward1m.rows() != spot.rows() ||
        forward1m.cols() != spot.cols())
        throw InputError("panel shape mismatch");
    for (std::size_t t = 1; t < dates.size(); ++t)
        if (!(dates[t - 1] < dates[t])) throw InputError("panel dates must be strictly increasing");
    for (double v : spot.data())
        if (!std::isnan(v) && !(v > 0.0)) throw InputError("non-positive spot price");
    for (double v : forward1m.data())
        if (!std::isnan(v) && !(v > 0.0)) throw InputError("non-positive forward price");
    QuotePanel p;
    p.dates = std::move(dates);
    p.currencies = std::move(currencies);
    p.spot = std::move(spot);
    p.forward1m = std::move(forward1m);
    p.refresh_availability();
    return p;
}

QuotePanel parse_panel(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw InputError(source_name + ": empty input, expected header date,currency,spot,forward_1m");

    int col_date = -1, col_ccy = -1, col_spot = -1, col_fwd = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h == "date") col_date = static_cast<int>(i);
        else if (h == "currency") col_ccy = static_cast<int>(i);
        else if (h == "spot") col_spot = static_cast<int>(i);
        else if (h == "forward_1m") col_fwd = static_cast<int>(i);
    }
    if (col_date < 0 || col_ccy < 0 || col_spot < 0 || col_fwd < 0)
        throw InputError(where(source_name, line_no) + "malformed header, expected date,currency,spot,forward_1m");

    struct Row {
        Date date;
        std::string ccy;
        double spot;
        double fwd;
    };
    std::vector<Row> rows;
    std::set<std::pair<Date, std::string>> seen;
    const std::size_t ncols = header.size();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto f = split_csv_line(line);
        const auto loc = where(source_name, line_no);
        if (f.size() != ncols) throw InputError(loc + "expected " + std::to_string(ncols) + " fields");
        Date d;
        try {
            d = Date::parse(f[col_date]);
        } catch (const InputError& e) {
            throw InputError(loc + e.what());
        }
        const auto& ccy = f[col_ccy];
        if (ccy.empty()) throw InputError(loc + "empty currency code");
        if (!seen.emplace(d, ccy).second) throw InputError(loc + "duplicate row for (" + d.iso() + ", " + ccy + ")");
        rows.push_back({d, ccy, parse_price(f[col_spot], "spot", loc), parse_price(f[col_fwd], "forward_1m", loc)});
    }
    if (rows.empty()) throw InputError(source_name + ": no data rows");

    std::vector<Date> dates;
    std::vector<std::string> ccys;
    for (const auto& r : rows) {
        dates.push_back(r.date);
        ccys.push_back(r.ccy);
    }
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
    std::sort(ccys.begin(), ccys.end());
    ccys.erase(std::unique(ccys.begin(), ccys.end()), ccys.end());

    Matrix spot(dates.size(), ccys.size(), kMissing);
    Matrix fwd(dates.size(), ccys.size(), kMissing);
    for (const auto& r : rows) {
        const auto t = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), r.date) - dates.begin());
        const auto c = static_cast<std::size_t>(std::lower_bound(ccys.begin(), ccys.end(), r.ccy) - ccys.begin());
        spot(t, c) = r.spot;
        fwd(t, c) = r.fwd;
    }
    return make_panel(std::move(dates), std::move(ccys), std::move(spot), std::move(fwd));
}

QuotePanel load_panel(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw InputError("cannot open panel file '" + csv_path.string() + "'");
    return parse_panel(in, csv_path.string());
}

std::vector<ExclusionRule> load_exclusions(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw InputError("cannot open exclusions file '" + csv_path.string() + "'");
    std::vector<ExclusionRule> rules;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto f = split_csv_line(line);
        if (!header_seen) {
            if (f.size() < 3 || f[0] != "currency" || f[1] != "from_date" || f[2] != "to_date")
                throw InputError(where(csv_path.string(), line_no) +
                                 "malformed header, expected currency,from_date,to_date,reason");
            header_seen = true;
            continue;
        }
        if (f.size() < 3) throw InputError(where(csv_path.string(), line_no) + "too few fields");
        ExclusionRule r;
        r.currency = f[0];
        try {
            if (!f[1].empty()) r.from_date = Date::parse(f[1]);
            if (!f[2].empty()) r.to_date = Date::parse(f[2]);
        } catch (const InputError& e) {
            throw InputError(where(csv_path.string(), line_no) + e.what());
        }
        if (r.from_date && r.to_date && *r.to_date < *r.from_date)
            throw InputError(where(csv_path.string(), line_no) + "from_date after to_date");
        for (std::size_t i = 3; i < f.size(); ++i) r.reason += (i > 3 ? "," : "") + f[i];
        rules.push_back(std::move(r));
    }
    return rules;
}

QuotePanel forward_fill(const QuotePanel& panel) {
    QuotePanel out = panel;
    for (std::size_t c = 0; c < out.num_currencies(); ++c) {
        for (Matrix* m : {&out.spot, &out.forward1m}) {
            double last = kMissing;
            for (std::size_t t = 0; t < out.num_dates(); ++t) {
                double& v = (*m)(t, c);
                if (std::isnan(v)) v = last;
                else last = v;
            }
        }
    }
    out.refresh_availability();
    return out;
}

QuotePanel apply_exclusions(const QuotePanel& panel, const std::vector<ExclusionRule>& rules) {
    QuotePanel out = panel;
    for (const auto& r : rules) {
        if (r.from_date && r.to_date && *r.to_date < *r.from_date)
            throw InputError("exclusion rule for " + r.currency + " has from_date after to_date");
        const auto c = out.currency_index(r.currency);
        if (!c) throw InputError("exclusion rule names unknown currency '" + r.currency + "'");
        for (std::size_t t = 0; t < out.num_dates(); ++t) {
            const auto& d = out.dates[t];
            if (r.from_date && d < *r.from_date) continue;
            if (r.to_date && *r.to_date < d) continue;
            out.excluded[t * out.num_currencies() + *c] = 1;
        }
    }
    out.refresh_availability();
    return out;
}

std::map<std::string, double> carry_signal(const QuotePanel& panel, const Date& date) {
    const auto t = panel.date_index(date);
    if (!t) throw InputError("date " + date.iso() + " not in panel");
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < panel.num_currencies(); ++c)
        if (panel.is_available(*t, c)) out.emplace(panel.currencies[c], panel.forward1m(*t, c) / panel.spot(*t, c));
    if (out.size() < 2)
        throw InputError("carry signal on " + date.iso() + " needs at least 2 available currencies, found " +
                         std::to_string(out.size()));
    return out;
}

LogReturnWindow extract_window(const QuotePanel& panel, const Date& end_date, int horizon_days,
                               const std::vector<std::string>& currencies) {
    if (horizon_days <= 0) throw InputError("horizon_days must be positive");
    const auto end = panel.date_index(end_date);
    if (!end) throw InputError("window end date " + end_date.iso() + " not in panel");
    const auto h = static_cast<std::size_t>(horizon_days);

    LogReturnWindow w;
    w.end_date = end_date;
    w.horizon_days = horizon_days;
    w.currencies = currencies;
    w.returns = Matrix(h, currencies.size());
    for (std::size_t j = 0; j < currencies.size(); ++j) {
        const auto c = panel.currency_index(currencies[j]);
        if (!c) throw InputError("unknown currency '" + currencies[j] + "'");
        if (*end < h)
            throw InputError("insufficient history for " + currencies[j] + ": need " + std::to_string(h + 1) +
                             " prices ending " + end_date.iso() + ", have " + std::to_string(*end + 1));
        const std::size_t first = *end - h;
        for (std::size_t t = first; t <= *end; ++t)
            if (!panel.is_available(t, *c))
                throw InputError("insufficient history for " + currencies[j] + ": unavailable on " +
                                 panel.dates[t].iso());
        for (std::size_t i = 0; i < h; ++i) {
            const double r = std::log(panel.forward1m(first + i + 1, *c) / panel.forward1m(first + i, *c));
            if (!std::isfinite(r)) throw NumericalError("non-finite return for " + currencies[j]);
            w.returns(i, j) = r;
        }
    }
    return w;
}

void write_panel_csv(const QuotePanel& panel, std::ostream& out) {
    out << "date,currency,spot,forward_1m\n";
    out << std::setprecision(17);
    for (std::size_t t = 0; t < panel.num_dates(); ++t) {
        const auto iso = panel.dates[t].iso();
        for (std::size_t c = 0; c < panel.num_currencies(); ++c) {
            out << iso << ',' << panel.currencies[c] << ',';
            if (!std::isnan(panel.spot(t, c))) out << panel.spot(t, c);
            out << ',';
            if (!std::isnan(panel.forward1m(t, c))) out << panel.forward1m(t, c);
            out << '\n';
        }
    }
}

}  // namespace carrytail::data
