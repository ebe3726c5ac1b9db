#include "carrytail/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "carrytail/error.hpp"

namespace carrytail::estimation {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Parameter boxes applied after decoding; outside them the objective is -inf.
constexpr double kMaxRho = 200.0;
constexpr double kMaxFrank = 50.0;
constexpr double kMaxBeta = 100.0;
// |rho_F| below this is treated as the independence copula.
constexpr double kFrankShortcut = 1e-4;
constexpr double kFrankIndependentValue = 1e-11;

std::vector<double> softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> w(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (w[i] = std::exp(z[i] - m));
    for (auto& x : w) x /= s;
    // Renormalize so the sum is exactly representable as 1 within rounding.
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) total += w[i];
    w.back() = std::max(0.0, 1.0 - total);
    return w;
}

bool in_box(const copula::MixtureSpec& mix) {
    for (const auto& c : mix.components) {
        const auto& s = c.spec;
        if (!std::isfinite(s.rho) || !std::isfinite(s.beta)) return false;
        switch (s.family) {
            case copula::Family::Clayton:
                if (!(s.rho > 0.0 && s.rho <= kMaxRho)) return false;
                break;
            case copula::Family::Gumbel:
                if (!(s.rho >= 1.0 && s.rho <= kMaxRho)) return false;
                break;
            case copula::Family::Frank:
                if (std::abs(s.rho) > kMaxFrank) return false;
                break;
            case copula::Family::OpClayton:
                if (!(s.rho > 0.0 && s.rho <= kMaxRho && s.beta >= 1.0 && s.beta <= kMaxBeta)) return false;
                break;
        }
    }
    return true;
}

double frank_param(double x, std::size_t d) {
    double rho = (d == 2) ? x : std::exp(x);
    if (std::abs(rho) < kFrankShortcut) rho = std::copysign(kFrankIndependentValue, rho == 0.0 ? 1.0 : rho);
    return rho;
}

}  // namespace

std::string_view model_name(Model m) {
    switch (m) {
        case Model::CFG: return "cfg";
        case Model::CG: return "cg";
        case Model::OPC: return "opc";
    }
    return "unknown";
}

Model parse_model(std::string_view name) {
    if (name == "cfg" || name == "CFG") return Model::CFG;
    if (name == "cg" || name == "CG") return Model::CG;
    if (name == "opc" || name == "OPC") return Model::OPC;
    throw InputError("unknown model '" + std::string(name) + "', expected cfg, cg or opc");
}

int param_count(Model m) {
    switch (m) {
        case Model::CFG: return 5;
        case Model::CG: return 3;
        case Model::OPC: return 2;
    }
    return 0;
}

std::vector<marginals::LggdParams> PseudoSample::marginal_params() const {
    std::vector<marginals::LggdParams> out;
    for (const auto& m : marginals) out.push_back(m.params);
    return out;
}

PseudoSample pseudo_from_uniforms(const Matrix& v) {
    PseudoSample p;
    p.v = v;
    for (std::size_t i = 0; i < p.v.rows(); ++i)
        for (double& x : p.v.row(i)) x = std::clamp(x, kPseudoClamp, 1.0 - kPseudoClamp);
    return p;
}

PseudoSample stage1_fit(const data::LogReturnWindow& window) {
    const auto grid = marginals::default_k_grid();
    return stage1_fit(window, grid);
}

PseudoSample stage1_fit(const data::LogReturnWindow& window, std::span<const double> k_grid) {
    const auto n = window.returns.rows();
    const auto d = window.returns.cols();
    if (n < kMinRows)
        throw InputError("stage1_fit needs at least " + std::to_string(kMinRows) + " rows, window has " +
                         std::to_string(n));
    if (d != window.currencies.size()) throw InputError("window currency list does not match return columns");

    PseudoSample out;
    out.source_window = std::make_shared<const data::LogReturnWindow>(window);
    out.v = Matrix(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto col = window.returns.column(j);
        MarginalFit mf;
        mf.currency = window.currencies[j];
        try {
            const auto fit = marginals::fit_lggd(col, k_grid);
            mf.params = fit.params;
            mf.loglik = fit.loglik;
        } catch (const std::exception& e) {
            throw NumericalError("marginal fit failed for " + mf.currency + ": " + e.what());
        }
        const auto params = mf.params;
        mf.ks = marginals::ks_test(col, [&](double y) { return marginals::lggd_cdf(y, params); });
        for (std::size_t i = 0; i < n; ++i)
            out.v(i, j) = std::clamp(marginals::lggd_cdf(col[i], params), kPseudoClamp, 1.0 - kPseudoClamp);
        out.marginals.push_back(std::move(mf));
    }
    return out;
}

void WindowFit::finalize() { aic = 2.0 * param_count(model) - 2.0 * loglik; }

void WindowFit::check_invariants() const {
    if (std::abs(aic - (2.0 * param_count(model) - 2.0 * loglik)) > 1e-9 * std::max(1.0, std::abs(aic)))
        throw std::logic_error("WindowFit AIC does not match 2k - 2 loglik");
    mixture.validate();
}

// ---- optimizer ----

OptimizeResult optimize(const Objective& objective, std::vector<double> start, const OptimizeOptions& opts) {
    auto f = [&](std::span<const double> x) {
        const double v = objective(x);
        return std::isfinite(v) ? v : kNegInf;
    };
    OptimizeResult res;
    res.x = std::move(start);
    double fx = f(res.x);
    if (!std::isfinite(fx)) throw InputError("objective is not finite at the starting point");
    res.trace.push_back(fx);

    const std::size_t n = res.x.size();
    std::vector<double> g(n), curv(n), p(n), probe(n), trial(n);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        double max_neg_curv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = opts.fd_relative_step * std::max(1.0, std::abs(res.x[i]));
            probe = res.x;
            probe[i] = res.x[i] + h;
            const double fp = f(probe);
            probe[i] = res.x[i] - h;
            const double fm = f(probe);
            curv[i] = std::numeric_limits<double>::quiet_NaN();
            if (std::isfinite(fp) && std::isfinite(fm)) {
                g[i] = (fp - fm) / (2.0 * h);
                curv[i] = (fp - 2.0 * fx + fm) / (h * h);
                if (curv[i] < 0.0) max_neg_curv = std::max(max_neg_curv, -curv[i]);
            } else if (std::isfinite(fp)) {
                g[i] = (fp - fx) / h;
            } else if (std::isfinite(fm)) {
                g[i] = (fx - fm) / h;
            } else {
                g[i] = 0.0;
            }
        }
        // Scale each coordinate by its curvature where the surface is locally concave.
        const double fallback = max_neg_curv > 0.0 ? max_neg_curv : 1.0;
        double pmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = (curv[i] < -1e-8 * fallback) ? -curv[i] : fallback;
            p[i] = g[i] / c;
            pmax = std::max(pmax, std::abs(p[i]));
        }
        if (pmax == 0.0 || !std::isfinite(pmax)) {
            res.converged = true;
            break;
        }
        double step = pmax > 2.0 ? 2.0 / pmax : 1.0;

        bool accepted = false;
        double ftrial = kNegInf;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = res.x[i] + step * p[i];
            ftrial = f(trial);
            if (ftrial > fx) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = true;
            break;
        }
        const double gain = ftrial - fx;
        res.x = trial;
        fx = ftrial;
        res.trace.push_back(fx);
        res.iterations = iter + 1;
        if (gain < opts.tolerance) {
            res.converged = true;
            break;
        }
    }
    res.value = fx;
    return res;
}

// ---- likelihood ----

MixtureLikelihood::MixtureLikelihood(const Matrix& v) : rows_(v.rows()), dim_(v.cols()) {
    if (dim_ < 2 || dim_ > static_cast<std::size_t>(copula::kMaxDim))
        throw InputError("copula dimension must be in 2..8");
    logs_.reserve(rows_ * dim_);
    for (double x : v.data()) logs_.push_back(copula::detail::coord_logs(x));
}

const std::vector<double>& MixtureLikelihood::component(std::size_t slot, const copula::CopulaSpec& spec) {
    if (cache_.size() <= slot) cache_.resize(slot + 1);
    auto& entries = cache_[slot];
    ++clock_;
    for (auto& e : entries) {
        if (e.spec == spec) {
            e.stamp = clock_;
            return e.values;
        }
    }
    constexpr std::size_t kEntries = 4;
    Entry* target = nullptr;
    if (entries.size() < kEntries) {
        entries.emplace_back();
        target = &entries.back();
    } else {
        target = &*std::min_element(entries.begin(), entries.end(),
                                    [](const Entry& a, const Entry& b) { return a.stamp < b.stamp; });
    }
    target->spec = spec;
    target->stamp = clock_;
    target->values.assign(rows_, 0.0);
    if (!copula::is_independence(spec)) {
        std::vector<double> a;
        const int d = static_cast<int>(dim_);
        if (spec.family == copula::Family::Gumbel) a = copula::adk_coefficients(d, 1.0 / spec.rho);
        if (spec.family == copula::Family::OpClayton) a = copula::adk_coefficients(d, 1.0 / spec.beta);
        try {
            for (std::size_t i = 0; i < rows_; ++i)
                target->values[i] = copula::detail::log_density_kernel(spec, {logs_.data() + i * dim_, dim_}, a);
        } catch (const std::exception&) {
            std::fill(target->values.begin(), target->values.end(), kNegInf);
        }
    }
    return target->values;
}

std::vector<double> MixtureLikelihood::row_log_densities(const copula::MixtureSpec& mix) {
    std::vector<const std::vector<double>*> comps;
    std::vector<double> logw;
    for (std::size_t c = 0; c < mix.components.size(); ++c) {
        if (mix.components[c].weight <= 0.0) continue;
        comps.push_back(&component(c, mix.components[c].spec));
        logw.push_back(std::log(mix.components[c].weight));
    }
    std::vector<double> out(rows_);
    std::vector<double> terms(comps.size());
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t c = 0; c < comps.size(); ++c) terms[c] = logw[c] + (*comps[c])[i];
        out[i] = copula::detail::log_sum_exp(terms);
    }
    return out;
}

double MixtureLikelihood::operator()(const copula::MixtureSpec& mix) {
    double total = 0.0;
    for (double x : row_log_densities(mix)) total += x;
    return std::isnan(total) ? kNegInf : total;
}

std::vector<double> default_start(Model m, std::size_t d) {
    const double frank0 = (d == 2) ? 0.5 : 0.0;  // rho_F = 0.5 (d = 2) or exp(0) = 1
    switch (m) {
        case Model::CFG: return {0.0, frank0, std::log(0.5), 0.0, 0.0, 0.0};
        case Model::CG: return {0.0, std::log(0.5), 0.0, 0.0};
        case Model::OPC: return {0.0, std::log(0.5)};
    }
    return {};
}

copula::MixtureSpec decode(Model m, std::span<const double> x, std::size_t d) {
    using copula::CopulaSpec;
    copula::MixtureSpec mix;
    switch (m) {
        case Model::CFG: {
            if (x.size() != 6) throw InputError("CFG expects 6 unconstrained parameters");
            const auto w = softmax(x.subspan(3, 3));
            mix.components = {{CopulaSpec::clayton(std::exp(x[0])), w[0]},
                              {CopulaSpec::frank(frank_param(x[1], d)), w[1]},
                              {CopulaSpec::gumbel(1.0 + std::exp(x[2])), w[2]}};
            break;
        }
        case Model::CG: {
            if (x.size() != 4) throw InputError("CG expects 4 unconstrained parameters");
            const auto w = softmax(x.subspan(2, 2));
            mix.components = {{CopulaSpec::clayton(std::exp(x[0])), w[0]},
                              {CopulaSpec::gumbel(1.0 + std::exp(x[1])), w[1]}};
            break;
        }
        case Model::OPC: {
            if (x.size() != 2) throw InputError("OPC expects 2 unconstrained parameters");
            mix.components = {{CopulaSpec::op_clayton(std::exp(x[0]), 1.0 + std::exp(x[1])), 1.0}};
            break;
        }
    }
    return mix;
}

double full_log_likelihood(const PseudoSample& pseudo, const copula::MixtureSpec& mix) {
    const bool with_margins = pseudo.source_window && pseudo.marginals.size() == pseudo.dim();
    double total = 0.0;
    for (std::size_t i = 0; i < pseudo.rows(); ++i) {
        double row = copula::mixture_log_density(mix, copula::UnitCubePoint(pseudo.v.row(i)));
        if (with_margins)
            for (std::size_t j = 0; j < pseudo.dim(); ++j)
                row += marginals::lggd_log_pdf(pseudo.source_window->returns(i, j), pseudo.marginals[j].params);
        total += row;
    }
    return total;
}

WindowFit stage2_fit(const PseudoSample& pseudo, Model model, const Stage2Options& opts,
                     Stage2Diagnostics* diagnostics) {
    const std::size_t d = pseudo.dim();
    if (pseudo.rows() < kMinRows)
        throw InputError("stage2_fit needs at least " + std::to_string(kMinRows) + " rows");
    MixtureLikelihood lik(pseudo.v);
    const Objective objective = [&](std::span<const double> x) {
        const auto mix = decode(model, x, d);
        if (!in_box(mix)) return kNegInf;
        return lik(mix);
    };

    std::vector<std::vector<double>> starts{default_start(model, d)};
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (int s = 0; s < opts.random_starts; ++s) {
        auto x = default_start(model, d);
        for (auto& xi : x) xi += jitter(rng);
        starts.push_back(std::move(x));
    }

    Stage2Diagnostics diag;
    for (const auto& s : starts) {
        if (!std::isfinite(objective(s))) continue;
        diag.runs.push_back(optimize(objective, s, opts.optimizer));
    }
    if (diag.runs.empty()) throw NumericalError("copula likelihood not finite at any starting point");
    for (std::size_t r = 1; r < diag.runs.size(); ++r)
        if (diag.runs[r].value > diag.runs[diag.best_run].value) diag.best_run = r;
    const auto& best = diag.runs[diag.best_run];

    WindowFit fit;
    if (pseudo.source_window) fit.end_date = pseudo.source_window->end_date;
    if (pseudo.source_window) fit.basket = pseudo.source_window->currencies;
    fit.model = model;
    fit.mixture = decode(model, best.x, d);
    fit.loglik = best.value;
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    fit.marginals = pseudo.marginals;

    // Likelihood decomposition: rowwise total equals copula term plus marginal term.
    double copula_term = 0.0, marginal_term = 0.0;
    for (std::size_t i = 0; i < pseudo.rows(); ++i) {
        copula_term += copula::mixture_log_density(fit.mixture, copula::UnitCubePoint(pseudo.v.row(i)));
        if (pseudo.source_window && pseudo.marginals.size() == d)
            for (std::size_t j = 0; j < d; ++j)
                marginal_term += marginals::lggd_log_pdf(pseudo.source_window->returns(i, j), pseudo.marginals[j].params);
    }
    fit.full_loglik = full_log_likelihood(pseudo, fit.mixture);
    if (std::abs(fit.full_loglik - (copula_term + marginal_term)) > 1e-9 * std::max(1.0, std::abs(fit.full_loglik)))
        throw std::logic_error("likelihood decomposition identity violated");

    fit.finalize();
    fit.check_invariants();
    if (diagnostics) *diagnostics = std::move(diag);
    return fit;
}

ModelComparison compare_models(const PseudoSample& pseudo, const Stage2Options& opts, std::span<const Model> models) {
    static constexpr Model kAll[] = {Model::CFG, Model::CG, Model::OPC};
    if (models.empty()) models = kAll;
    ModelComparison out;
    for (Model m : models) {
        try {
            out.fits.push_back(stage2_fit(pseudo, m, opts));
        } catch (const std::exception& e) {
            out.failures.emplace_back(m, e.what());
        }
    }
    std::stable_sort(out.fits.begin(), out.fits.end(), [](const WindowFit& a, const WindowFit& b) { return a.aic < b.aic; });
    auto aic_of = [&](Model m) -> std::optional<double> {
        for (const auto& f : out.fits)
            if (f.model == m) return f.aic;
        return std::nullopt;
    };
    const auto cfg = aic_of(Model::CFG), cg = aic_of(Model::CG), opc = aic_of(Model::OPC);
    if (cfg && cg) out.aic_cg_minus_cfg = *cg - *cfg;
    if (cfg && opc) out.aic_opc_minus_cfg = *opc - *cfg;
    return out;
}

}  // namespace carrytail::estimation
