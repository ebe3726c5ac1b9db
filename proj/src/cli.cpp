#include "carrytail/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "carrytail/carry_portfolio.hpp"
#include "carrytail/data_ingest.hpp"
#include "carrytail/error.hpp"
#include "carrytail/estimation.hpp"
#include "carrytail/marginals.hpp"
#include "carrytail/serialization.hpp"
#include "carrytail/simulate.hpp"
#include "carrytail/tail_dependence.hpp"

namespace carrytail::cli {
namespace fs = std::filesystem;
using io::fmt;
using nlohmann::json;

namespace {

std::vector<estimation::Model> parse_models(const std::string& s) {
    if (s == "all") return {estimation::Model::CFG, estimation::Model::CG, estimation::Model::OPC};
    return {estimation::parse_model(s)};
}

data::QuotePanel load_input(const RunConfig& cfg) {
    if (cfg.input.empty()) throw InputError("--input is required");
    auto panel = data::load_panel(cfg.input);
    if (!cfg.exclusions.empty()) panel = data::apply_exclusions(panel, data::load_exclusions(cfg.exclusions));
    return data::forward_fill(panel);
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out);
    const auto path = fs::path(cfg.out) / name;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

json provenance(const RunConfig& cfg) {
    return {{"provenance",
             {{"tool", "carrytail"}, {"command", cfg.command}, {"config_hash", io::config_hash(cfg.canonical())}}}};
}

std::string prov_line(const RunConfig& cfg) { return io::provenance_line(cfg.command, io::config_hash(cfg.canonical())); }

std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
    return s;
}

std::string tag(const RunConfig& cfg) { return cfg.model + "_" + std::to_string(cfg.horizon); }

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

void check_horizon(const RunConfig& cfg) {
    if (cfg.horizon < static_cast<int>(estimation::kMinRows))
        throw InputError("--horizon must be at least " + std::to_string(estimation::kMinRows));
}

// ---- fit-marginals ----

int cmd_fit_marginals(const RunConfig& cfg) {
    check_horizon(cfg);
    const auto panel = load_input(cfg);
    const auto grid = cfg.k_grid.empty() ? marginals::default_k_grid() : parse_k_grid(cfg.k_grid);
    const auto dates = portfolio::fit_dates(panel, cfg.horizon, cfg.stride);
    if (dates.empty()) throw InputError("panel too short for a " + std::to_string(cfg.horizon) + "-day window");

    struct Cell {
        std::string currency;
        json record;
        bool lggd_reject = false, lognormal_reject = false;
    };
    std::vector<std::vector<Cell>> results(dates.size());
    std::atomic<std::size_t> failures{0};
    parallel_for(dates.size(), cfg.threads, [&](std::size_t i) {
        for (const auto& c : panel.currencies) {
            std::vector<double> y;
            try {
                y = data::extract_window(panel, dates[i], cfg.horizon, {c}).returns.column(0);
            } catch (const InputError&) {
                continue;  // currency not fully available over this window
            }
            try {
                const auto lg = marginals::fit_lggd(y, grid);
                const auto ln = marginals::fit_lognormal(y);
                const auto ks_lg = marginals::ks_test(y, [&](double x) { return marginals::lggd_cdf(x, lg.params); });
                const auto ks_ln =
                    marginals::ks_test(y, [&](double x) { return marginals::normal_cdf(x, ln.mean, ln.sd); });
                json rec{{"end_date", dates[i].iso()},
                         {"currency", c},
                         {"lggd",
                          {{"k", lg.params.k}, {"u", lg.params.u}, {"b", lg.params.b}, {"loglik", lg.loglik},
                           {"ks_statistic", ks_lg.statistic}, {"ks_p_value", ks_lg.p_value}, {"reject", ks_lg.reject_at_5pct}}},
                         {"lognormal",
                          {{"mean", ln.mean}, {"sd", ln.sd}, {"loglik", ln.loglik}, {"ks_statistic", ks_ln.statistic},
                           {"ks_p_value", ks_ln.p_value}, {"reject", ks_ln.reject_at_5pct}}}};
                results[i].push_back({c, std::move(rec), ks_lg.reject_at_5pct, ks_ln.reject_at_5pct});
            } catch (const std::exception& e) {
                ++failures;
                std::cerr << "warning: " << dates[i].iso() << " " << c << ": " << e.what() << '\n';
            }
        }
    });

    auto jl = open_out(cfg, "marginals_" + std::to_string(cfg.horizon) + ".jsonl");
    jl << provenance(cfg).dump() << '\n';
    std::map<std::string, std::array<std::size_t, 3>> table;  // windows, lggd rejects, lognormal rejects
    std::size_t n = 0;
    for (const auto& row : results)
        for (const auto& cell : row) {
            jl << cell.record.dump() << '\n';
            auto& t = table[cell.currency];
            ++t[0];
            t[1] += cell.lggd_reject;
            t[2] += cell.lognormal_reject;
            ++n;
        }
    auto ks = open_out(cfg, "ks_rejections_" + std::to_string(cfg.horizon) + ".csv");
    ks << prov_line(cfg) << '\n' << "currency,windows,lggd_reject_prop,lognormal_reject_prop\n";
    for (const auto& [c, t] : table)
        ks << c << ',' << t[0] << ',' << fmt(static_cast<double>(t[1]) / t[0]) << ','
           << fmt(static_cast<double>(t[2]) / t[0]) << '\n';
    std::cout << "fit-marginals: " << n << " window fits over " << dates.size() << " dates, " << failures
              << " failures\n";
    if (n == 0) return kAllWindowsFailed;
    return kOk;
}

// ---- fit-copulas ----

int cmd_fit_copulas(const RunConfig& cfg) {
    check_horizon(cfg);
    const auto panel = load_input(cfg);
    portfolio::RollingOptions opts;
    opts.horizon_days = cfg.horizon;
    opts.stride = cfg.stride;
    opts.models = parse_models(cfg.model);
    if (!cfg.k_grid.empty()) opts.k_grid = parse_k_grid(cfg.k_grid);
    opts.stage2.seed = cfg.seed;
    opts.threads = cfg.threads;
    if (portfolio::fit_dates(panel, cfg.horizon, cfg.stride).empty())
        throw InputError("panel too short for a " + std::to_string(cfg.horizon) + "-day window");

    const auto res = portfolio::rolling_fit(panel, opts);
    for (const auto& s : res.skipped)
        std::cerr << "warning: skipped " << s.date.iso() << " " << s.side << ": " << s.reason << '\n';

    for (std::size_t m = 0; m < opts.models.size(); ++m) {
        const std::string name = std::string(estimation::model_name(opts.models[m]));
        auto out = open_out(cfg, "fits_" + name + "_" + std::to_string(cfg.horizon) + ".jsonl");
        out << provenance(cfg).dump() << '\n';
        for (const auto& f : res.fits[m]) out << io::to_json(f).dump() << '\n';
    }

    auto bk = open_out(cfg, "baskets.csv");
    bk << prov_line(cfg) << '\n' << "date,side,currencies\n";
    for (const auto& b : res.baskets) {
        bk << b.date.iso() << ",high_ir," << join(b.high_ir, '|') << '\n';
        bk << b.date.iso() << ",low_ir," << join(b.low_ir, '|') << '\n';
    }

    if (opts.models.size() > 1) {
        std::map<std::pair<Date, std::string>, std::map<estimation::Model, double>> aic;
        for (const auto& fits : res.fits)
            for (const auto& f : fits) aic[{f.end_date, f.side}][f.model] = f.aic;
        auto out = open_out(cfg, "aic_" + std::to_string(cfg.horizon) + ".csv");
        out << prov_line(cfg) << '\n' << "date,side,aic_cfg,aic_cg,aic_opc,aic_cg_minus_cfg,aic_opc_minus_cfg\n";
        auto cell = [](const std::map<estimation::Model, double>& m, estimation::Model k) {
            const auto it = m.find(k);
            return it == m.end() ? std::string() : fmt(it->second);
        };
        auto diff = [](const std::map<estimation::Model, double>& m, estimation::Model a, estimation::Model b) {
            if (!m.count(a) || !m.count(b)) return std::string();
            return fmt(m.at(a) - m.at(b));
        };
        using estimation::Model;
        for (const auto& [key, m] : aic)
            out << key.first.iso() << ',' << key.second << ',' << cell(m, Model::CFG) << ',' << cell(m, Model::CG) << ','
                << cell(m, Model::OPC) << ',' << diff(m, Model::CG, Model::CFG) << ',' << diff(m, Model::OPC, Model::CFG)
                << '\n';
    }

    const std::size_t fitted = res.fits.front().size();
    std::cout << "fit-copulas: " << fitted << " windows fitted, " << res.skipped.size() << " skipped\n";
    if (fitted == 0) {
        std::cerr << "error: every window failed\n";
        return kAllWindowsFailed;
    }
    return kOk;
}

// ---- tail-dependence ----

int cmd_tail_dependence(const RunConfig& cfg) {
    if (cfg.model == "all") throw InputError("tail-dependence takes a single --model");
    const auto model = estimation::parse_model(cfg.model);
    const fs::path path = cfg.fits.empty() ? fs::path(cfg.out) / ("fits_" + tag(cfg) + ".jsonl") : fs::path(cfg.fits);
    if (!fs::exists(path)) throw InputError("fits file " + path.string() + " not found");
    auto fits = io::read_fits_jsonl(path);

    std::map<std::string, std::vector<estimation::WindowFit>> by_side;
    for (auto& f : fits) {
        if (f.model != model) continue;
        by_side[f.side.empty() ? "basket" : f.side].push_back(std::move(f));
    }
    std::vector<td::TailDependenceSeries> series;
    for (auto& [side, v] : by_side) {
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.end_date < b.end_date; });
        series.push_back(td::td_series(v, side));
    }
    auto out = open_out(cfg, "td_" + tag(cfg) + ".csv");
    out << prov_line(cfg) << '\n';
    io::write_td_csv(out, series);
    std::size_t n = 0;
    for (const auto& s : series) n += s.size();
    std::cout << "tail-dependence: " << n << " points written\n";
    return kOk;
}

// ---- backtest ----

td::TailDependenceSeries find_side(const std::vector<td::TailDependenceSeries>& all, const std::string& side) {
    for (const auto& s : all)
        if (s.basket_side == side) return s;
    throw InputError("tail dependence file has no " + side + " series");
}

double mean(const std::vector<double>& x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sd(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

int cmd_backtest(const RunConfig& cfg) {
    const auto rule = portfolio::parse_adjust_rule(cfg.adjust_rule);
    const auto panel = load_input(cfg);
    const fs::path path = cfg.td.empty() ? fs::path(cfg.out) / ("td_" + tag(cfg) + ".csv") : fs::path(cfg.td);
    if (!fs::exists(path)) throw InputError("tail dependence file " + path.string() + " not found");
    const auto all = io::read_td_csv(path);
    auto high = find_side(all, "high_ir");
    auto low = find_side(all, "low_ir");
    if (high.dates.empty() || low.dates.empty()) throw InputError("tail dependence series is empty");
    if (cfg.zero_td)
        for (auto* s : {&high, &low}) {
            std::fill(s->upper.begin(), s->upper.end(), 0.0);
            std::fill(s->lower.begin(), s->lower.end(), 0.0);
        }

    const Date first = std::max(high.dates.front(), low.dates.front());
    std::vector<Date> months;
    for (const auto& d : portfolio::month_ends(panel))
        if (d >= first) months.push_back(d);
    if (months.size() < 2)
        throw InputError("no complete month covered by tail dependence from " + first.iso());

    const auto ret = portfolio::carry_returns(panel, months);
    const auto adj = portfolio::adjust_returns(ret, high, low, rule);

    auto r = open_out(cfg, "returns.csv");
    r << prov_line(cfg) << '\n' << "date,high,low,hml\n";
    for (std::size_t i = 0; i < ret.dates.size(); ++i)
        r << ret.dates[i].iso() << ',' << fmt(ret.high_leg[i]) << ',' << fmt(ret.low_leg[i]) << ',' << fmt(ret.hml[i])
          << '\n';
    auto a = open_out(cfg, "adjusted.csv");
    a << prov_line(cfg) << '\n' << "date,raw,downside_adj,upside_adj,cum_raw,cum_down,cum_up\n";
    for (std::size_t i = 0; i < adj.dates.size(); ++i)
        a << adj.dates[i].iso() << ',' << fmt(adj.raw[i]) << ',' << fmt(adj.downside_adj[i]) << ','
          << fmt(adj.upside_adj[i]) << ',' << fmt(adj.cum_raw[i]) << ',' << fmt(adj.cum_down[i]) << ','
          << fmt(adj.cum_up[i]) << '\n';

    json summary = provenance(cfg);
    summary["adjust_rule"] = cfg.adjust_rule;
    summary["zero_td"] = cfg.zero_td;
    summary["months"] = adj.dates.size();
    summary["first_date"] = adj.dates.front().iso();
    summary["last_date"] = adj.dates.back().iso();
    for (const auto& [name, v] : {std::pair{"raw", &adj.raw}, {"downside_adj", &adj.downside_adj}, {"upside_adj", &adj.upside_adj}})
        summary[name] = {{"mean", mean(*v)}, {"sd", sd(*v)}, {"cumulative", std::accumulate(v->begin(), v->end(), 0.0)}};
    auto s = open_out(cfg, "summary.json");
    s << summary.dump(2) << '\n';
    std::cout << "backtest: " << adj.dates.size() << " months, cum_raw " << fmt(adj.cum_raw.back()) << ", cum_down "
              << fmt(adj.cum_down.back()) << ", cum_up " << fmt(adj.cum_up.back()) << '\n';
    return kOk;
}

// ---- simulate ----

int cmd_simulate(const RunConfig& cfg) {
    sim::SimulationConfig sc;
    sc.n_currencies = cfg.currencies;
    sc.years = cfg.years;
    sc.seed = cfg.seed;
    sc.start = Date::parse(cfg.start);
    if (!(cfg.margin_k > 0.0) || !(cfg.margin_b > 0.0)) throw InputError("--margin-k and --margin-b must be positive");
    sc.margin = sim::zero_mean_lggd(cfg.margin_k, cfg.margin_b);
    if (cfg.copula == "independence") {
        sc.copula = copula::MixtureSpec::single(copula::CopulaSpec::gumbel(1.0));
    } else if (cfg.copula != "cfg") {
        std::ifstream in(cfg.copula);
        if (!in) throw InputError("cannot open copula spec " + cfg.copula);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw InputError(cfg.copula + ": " + e.what());
        }
        sc.copula = io::mixture_from_json(j);
    }
    const auto s = sim::simulate_panel(sc);
    auto p = open_out(cfg, "panel.csv");
    p << prov_line(cfg) << '\n';
    data::write_panel_csv(s.panel, p);
    auto t = open_out(cfg, "truth.json");
    t << sim::truth_json(sc, s).dump(2) << '\n';
    std::cout << "simulate: " << s.panel.num_dates() << " days x " << s.panel.num_currencies() << " currencies\n";
    return kOk;
}

}  // namespace

std::string RunConfig::canonical() const {
    std::ostringstream s;
    s << "command=" << command << ";input=" << input << ";exclusions=" << exclusions << ";fits=" << fits
      << ";td=" << td << ";horizon=" << horizon << ";model=" << model << ";stride=" << stride << ";seed=" << seed
      << ";adjust_rule=" << adjust_rule << ";k_grid=" << k_grid << ";zero_td=" << zero_td
      << ";currencies=" << currencies << ";years=" << years << ";copula=" << copula << ";start=" << start
      << ";margin_k=" << margin_k << ";margin_b=" << margin_b;
    return s.str();
}

std::vector<double> parse_k_grid(const std::string& spec) {
    std::stringstream ss(spec);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
        throw InputError("--k-grid expects lo:hi:n, got '" + spec + "'");
    try {
        const double lo = std::stod(a), hi = std::stod(b);
        const int n = std::stoi(c);
        if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InputError("--k-grid needs 0 < lo <= hi and n >= 1");
        return marginals::geometric_grid(lo, hi, n);
    } catch (const std::logic_error&) {
        throw InputError("--k-grid expects numbers, got '" + spec + "'");
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Tail dependence of currency carry baskets"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto common = [&](CLI::App* sub, bool input) {
        if (input) {
            sub->add_option("--input", cfg.input, "quote panel CSV (date,currency,spot,forward_1m)")->required();
            sub->add_option("--exclusions", cfg.exclusions, "exclusion rules CSV");
        }
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--seed", cfg.seed, "random seed");
    };
    auto windows = [&](CLI::App* sub) {
        sub->add_option("--horizon", cfg.horizon, "window length in trading days (126 or 252)");
        sub->add_option("--stride", cfg.stride, "refit every N trading days")->check(CLI::PositiveNumber);
        sub->add_option("--k-grid", cfg.k_grid, "l.g.g.d. shape grid lo:hi:n");
        sub->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* fm = app.add_subcommand("fit-marginals", "rolling l.g.g.d. and LogNormal fits with K-S tests");
    common(fm, true);
    windows(fm);

    auto* fc = app.add_subcommand("fit-copulas", "rolling mixture-copula fits per basket");
    common(fc, true);
    windows(fc);
    fc->add_option("--model", cfg.model, "cfg, cg, opc or all");

    auto* tdc = app.add_subcommand("tail-dependence", "tail dependence series from fits");
    common(tdc, false);
    tdc->add_option("--fits", cfg.fits, "fits JSONL (default OUT/fits_MODEL_HORIZON.jsonl)");
    tdc->add_option("--model", cfg.model, "cfg, cg or opc");
    tdc->add_option("--horizon", cfg.horizon, "window length used by the fits");

    auto* bt = app.add_subcommand("backtest", "HML carry returns and tail-adjusted returns");
    common(bt, true);
    bt->add_option("--td", cfg.td, "tail dependence CSV (default OUT/td_MODEL_HORIZON.csv)");
    bt->add_option("--model", cfg.model, "model of the default TD file");
    bt->add_option("--horizon", cfg.horizon, "horizon of the default TD file");
    bt->add_option("--adjust-rule", cfg.adjust_rule, "product or max");
    bt->add_flag("--zero-td", cfg.zero_td, "control run with all tail dependence set to zero");

    auto* sm = app.add_subcommand("simulate", "synthetic quote panel with known copula and margins");
    common(sm, false);
    sm->add_option("--currencies", cfg.currencies, "number of currencies")->check(CLI::Range(2, 200));
    sm->add_option("--years", cfg.years, "calendar years of weekdays")->check(CLI::Range(1, 50));
    sm->add_option("--copula", cfg.copula, "cfg, independence, or a JSON spec file");
    sm->add_option("--start", cfg.start, "first calendar date");
    sm->add_option("--margin-k", cfg.margin_k, "l.g.g.d. shape of every margin");
    sm->add_option("--margin-b", cfg.margin_b, "l.g.g.d. scale of every margin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInputError;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        if (*fm) return cmd_fit_marginals(cfg);
        if (*fc) return cmd_fit_copulas(cfg);
        if (*tdc) return cmd_tail_dependence(cfg);
        if (*bt) return cmd_backtest(cfg);
        if (*sm) return cmd_simulate(cfg);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> store{"carrytail"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : store) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace carrytail::cli
