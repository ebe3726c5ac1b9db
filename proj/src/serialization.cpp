#include "carrytail/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "carrytail/error.hpp"

namespace carrytail::io {

json to_json(const copula::CopulaSpec& s) {
    json j{{"family", std::string(copula::family_name(s.family))}, {"rho", s.rho}};
    if (s.family == copula::Family::OpClayton) j["beta"] = s.beta;
    return j;
}

json to_json(const copula::MixtureSpec& m) {
    json arr = json::array();
    for (const auto& c : m.components) {
        auto j = to_json(c.spec);
        j["lambda"] = c.weight;
        arr.push_back(std::move(j));
    }
    return json{{"mixture", std::move(arr)}};
}

json to_json(const marginals::LggdParams& p) { return json{{"k", p.k}, {"u", p.u}, {"b", p.b}}; }

json to_json(const estimation::WindowFit& f) {
    json margs = json::array();
    for (const auto& m : f.marginals) {
        auto j = to_json(m.params);
        j["currency"] = m.currency;
        j["loglik"] = m.loglik;
        j["ks_statistic"] = m.ks.statistic;
        j["ks_p_value"] = m.ks.p_value;
        margs.push_back(std::move(j));
    }
    return json{{"end_date", f.end_date.iso()},
                {"side", f.side},
                {"basket", f.basket},
                {"model", std::string(estimation::model_name(f.model))},
                {"mixture", to_json(f.mixture)},
                {"loglik", f.loglik},
                {"full_loglik", f.full_loglik},
                {"aic", f.aic},
                {"converged", f.converged},
                {"iterations", f.iterations},
                {"marginals", std::move(margs)}};
}

copula::CopulaSpec copula_from_json(const json& j) {
    try {
        copula::CopulaSpec s;
        s.family = copula::parse_family(j.at("family").get<std::string>());
        s.rho = j.at("rho").get<double>();
        s.beta = j.contains("beta") ? j.at("beta").get<double>() : 1.0;
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad copula spec: ") + e.what());
    }
}

copula::MixtureSpec mixture_from_json(const json& j) {
    if (!j.contains("mixture")) return copula::MixtureSpec::single(copula_from_json(j));
    copula::MixtureSpec m;
    try {
        for (const auto& c : j.at("mixture")) m.components.push_back({copula_from_json(c), c.at("lambda").get<double>()});
    } catch (const json::exception& e) {
        throw InputError(std::string("bad mixture spec: ") + e.what());
    }
    m.validate();
    return m;
}

marginals::LggdParams lggd_from_json(const json& j) {
    try {
        marginals::LggdParams p{j.at("k").get<double>(), j.at("u").get<double>(), j.at("b").get<double>()};
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad l.g.g.d. parameters: ") + e.what());
    }
}

estimation::WindowFit window_fit_from_json(const json& j) {
    estimation::WindowFit f;
    try {
        f.end_date = Date::parse(j.at("end_date").get<std::string>());
        f.side = j.value("side", "");
        f.basket = j.at("basket").get<std::vector<std::string>>();
        f.model = estimation::parse_model(j.at("model").get<std::string>());
        f.mixture = mixture_from_json(j.at("mixture"));
        f.loglik = j.at("loglik").get<double>();
        f.full_loglik = j.value("full_loglik", f.loglik);
        f.aic = j.at("aic").get<double>();
        f.converged = j.value("converged", false);
        f.iterations = j.value("iterations", 0);
        if (j.contains("marginals"))
            for (const auto& m : j.at("marginals")) {
                estimation::MarginalFit mf;
                mf.currency = m.at("currency").get<std::string>();
                mf.params = lggd_from_json(m);
                mf.loglik = m.value("loglik", 0.0);
                mf.ks.statistic = m.value("ks_statistic", 0.0);
                mf.ks.p_value = m.value("ks_p_value", 1.0);
                mf.ks.reject_at_5pct = mf.ks.p_value < 0.05;
                f.marginals.push_back(std::move(mf));
            }
    } catch (const json::exception& e) {
        throw InputError(std::string("bad window fit record: ") + e.what());
    }
    return f;
}

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string provenance_line(const std::string& command, const std::string& hash) {
    return "# provenance tool=carrytail command=" + command + " config_hash=" + hash;
}

std::vector<estimation::WindowFit> read_fits_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open fits file " + path.string());
    std::vector<estimation::WindowFit> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.contains("provenance")) continue;
        out.push_back(window_fit_from_json(j));
    }
    return out;
}

std::string fmt(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

void write_td_csv(std::ostream& out, const std::vector<td::TailDependenceSeries>& series) {
    struct Row {
        Date date;
        std::string side;
        double up, lo;
    };
    std::vector<Row> rows;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.size(); ++i) rows.push_back({s.dates[i], s.basket_side, s.upper[i], s.lower[i]});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.date != b.date ? a.date < b.date : a.side < b.side;
    });
    out << "date,basket,upper_td,lower_td\n";
    for (const auto& r : rows) out << r.date.iso() << ',' << r.side << ',' << fmt(r.up) << ',' << fmt(r.lo) << '\n';
}

std::vector<td::TailDependenceSeries> read_td_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open tail dependence file " + path.string());
    std::map<std::string, std::vector<std::tuple<Date, double, double>>> by_side;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "date,basket,upper_td,lower_td")
                throw InputError(path.string() + ": expected header date,basket,upper_td,lower_td");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string d, side, up, lo;
        std::getline(ss, d, ',');
        std::getline(ss, side, ',');
        std::getline(ss, up, ',');
        std::getline(ss, lo, ',');
        try {
            by_side[side].emplace_back(Date::parse(d), std::stod(up), std::stod(lo));
        } catch (const std::invalid_argument&) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad number");
        } catch (const InputError& e) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!header) throw InputError(path.string() + ": empty tail dependence file");
    std::vector<td::TailDependenceSeries> out;
    for (auto& [side, rows] : by_side) {
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
        td::TailDependenceSeries s;
        s.basket_side = side;
        for (const auto& [d, up, lo] : rows) {
            s.dates.push_back(d);
            s.dims.push_back(0);
            s.upper.push_back(up);
            s.lower.push_back(lo);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace carrytail::io
