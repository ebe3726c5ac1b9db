#include "carrytail/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "carrytail/error.hpp"

namespace carrytail::marginals {
namespace {

// exp() overflows past ~709.78; beyond this the density is zero to double precision.
constexpr double kExpOverflow = 700.0;

void require_finite(double y) {
    if (!std::isfinite(y)) throw InputError("non-finite argument to l.g.g.d. function");
}

struct Moments {
    double mean;
    double sd;
    double max;
};

Moments moments(std::span<const double> ys) {
    const double n = static_cast<double>(ys.size());
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double ss = 0.0;
    for (double y : ys) ss += (y - mean) * (y - mean);
    return {mean, std::sqrt(ss / n), *std::max_element(ys.begin(), ys.end())};
}

// Weighted mean of y under weights exp(y / b) together with the weighted variance.
struct Tilted {
    double mean;
    double var;
    double log_mean_weight;  // ln( mean_i exp((y_i - ymax)/b) )
};

Tilted tilted(std::span<const double> ys, double b, double ymax) {
    double sw = 0.0, swy = 0.0;
    for (double y : ys) {
        const double w = std::exp((y - ymax) / b);
        sw += w;
        swy += w * y;
    }
    const double m = swy / sw;
    double swv = 0.0;
    for (double y : ys) swv += std::exp((y - ymax) / b) * (y - m) * (y - m);
    return {m, swv / sw, std::log(sw / static_cast<double>(ys.size()))};
}

}  // namespace

void LggdParams::validate() const {
    if (!(k > 0.0) || !std::isfinite(k)) throw InputError("l.g.g.d. shape k must be positive");
    if (!(b > 0.0) || !std::isfinite(b)) throw InputError("l.g.g.d. scale b must be positive");
    if (!std::isfinite(u)) throw InputError("l.g.g.d. location u must be finite");
}

LggdParams ProfileTransformedParams::to_lggd() const {
    const double b = sigma_tilde * std::sqrt(k);
    return {k, mu_tilde - b * std::log(k), b};
}

ProfileTransformedParams ProfileTransformedParams::from_lggd(const LggdParams& p) {
    return {p.u + p.b * std::log(p.k), p.b / std::sqrt(p.k), p.k};
}

double lggd_log_pdf(double y, const LggdParams& p) {
    require_finite(y);
    const double z = (y - p.u) / p.b;
    // Past the exp() overflow point the density is below the smallest double: -e^z saturates.
    if (z > kExpOverflow && z > std::log(std::numeric_limits<double>::max() / 2.0))
        return std::numeric_limits<double>::lowest();
    return p.k * z - std::exp(z) - std::log(p.b) - boost::math::lgamma(p.k);
}

double lggd_cdf(double y, const LggdParams& p) {
    if (std::isnan(y)) throw InputError("NaN argument to lggd_cdf");
    if (y == -std::numeric_limits<double>::infinity()) return 0.0;
    if (y == std::numeric_limits<double>::infinity()) return 1.0;
    const double z = (y - p.u) / p.b;
    if (z > kExpOverflow) return 1.0;
    const double x = std::exp(z);
    if (x == 0.0) return 0.0;
    return boost::math::gamma_p(p.k, x);
}

double lggd_quantile(double q, const LggdParams& p) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("lggd_quantile requires 0 < q < 1");
    const double x = boost::math::gamma_p_inv(p.k, q);
    if (!(x > 0.0) || !std::isfinite(x)) throw NumericalError("incomplete gamma inversion failed");
    return p.u + p.b * std::log(x);
}

double lggd_log_likelihood(std::span<const double> ys, const LggdParams& p) {
    double ll = 0.0;
    for (double y : ys) ll += lggd_log_pdf(y, p);
    return ll;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InputError("invalid geometric grid");
    if (n == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(n));
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    g.back() = hi;
    return g;
}

std::vector<double> default_k_grid() { return geometric_grid(0.1, 1000.0, 40); }

double sigma_score(std::span<const double> ys, double k, double sigma_tilde) {
    const auto m = moments(ys);
    const double b = sigma_tilde * std::sqrt(k);
    return tilted(ys, b, m.max).mean - m.mean - sigma_tilde / std::sqrt(k);
}

std::optional<ProfilePoint> profile_at(std::span<const double> ys, double k) {
    const auto m = moments(ys);
    if (!(m.sd > 0.0)) return std::nullopt;
    const double rk = std::sqrt(k);
    auto g = [&](double s) { return tilted(ys, s * rk, m.max).mean - m.mean - s / rk; };

    double lo = 1e-6, hi = 10.0 * m.sd;
    double glo = g(lo), ghi = g(hi);
    for (int i = 0; i < 60 && !(glo > 0.0); ++i) glo = g(lo *= 0.1);
    for (int i = 0; i < 60 && !(ghi < 0.0); ++i) ghi = g(hi *= 2.0);
    if (!(glo > 0.0) || !(ghi < 0.0)) return std::nullopt;

    // Safeguarded Newton on the bracket [lo, hi]; g is decreasing through the root.
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double b = s * rk;
        const auto tw = tilted(ys, b, m.max);
        const double gs = tw.mean - m.mean - s / rk;
        if (gs > 0.0) lo = s;
        else hi = s;
        if (gs == 0.0 || (hi - lo) <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        const double dg = -rk * tw.var / (b * b) - 1.0 / rk;
        double next = s - gs / dg;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (next == s) break;
        s = next;
    }

    const double b = s * rk;
    const auto tw = tilted(ys, b, m.max);
    ProfilePoint pt;
    pt.k = k;
    pt.transformed = {m.max + b * tw.log_mean_weight, s, k};
    pt.params = pt.transformed.to_lggd();
    pt.residual = tw.mean - m.mean - s / rk;
    pt.loglik = lggd_log_likelihood(ys, pt.params);
    if (!std::isfinite(pt.loglik)) return std::nullopt;
    return pt;
}

LggdFit fit_lggd(std::span<const double> samples, std::span<const double> k_grid) {
    if (samples.size() < 20) throw InputError("fit_lggd needs at least 20 samples");
    for (double y : samples)
        if (!std::isfinite(y)) throw InputError("fit_lggd: non-finite sample");
    if (k_grid.empty()) throw InputError("fit_lggd: empty k grid");

    LggdFit fit;
    fit.loglik = -std::numeric_limits<double>::infinity();
    for (double k : k_grid) {
        if (!(k > 0.0)) throw InputError("fit_lggd: k grid values must be positive");
        auto pt = profile_at(samples, k);
        if (!pt) {
            fit.skipped_k.push_back(k);
            continue;
        }
        if (pt->loglik > fit.loglik) {
            fit.loglik = pt->loglik;
            fit.params = pt->params;
        }
        fit.profile.push_back(*pt);
    }
    if (fit.profile.empty()) throw NumericalError("fit_lggd: sigma~ root search failed at every grid k");
    return fit;
}

LogNormalFit fit_lognormal(std::span<const double> log_samples) {
    if (log_samples.size() < 2) throw InputError("fit_lognormal needs at least 2 samples");
    const auto m = moments(log_samples);
    if (!(m.sd > 0.0)) throw NumericalError("fit_lognormal: zero variance");
    const double n = static_cast<double>(log_samples.size());
    const double ll = -0.5 * n * std::log(2.0 * std::numbers::pi * m.sd * m.sd) - 0.5 * n;
    return {m.mean, m.sd, ll};
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); }

double normal_log_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

LggdParams lognormal_as_lggd(const LogNormalFit& fit, double k) {
    const double b = fit.sd / std::sqrt(boost::math::trigamma(k));
    return {k, fit.mean - b * boost::math::digamma(k), b};
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Theta-function form converges fast for small lambda.
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int j = 1; j <= 20; ++j) s += std::exp(-(2 * j - 1) * (2 * j - 1) * c);
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        s += (j % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < 5) throw InputError("ks_test needs at least 5 samples");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    KsResult r;
    r.statistic = std::clamp(d, 0.0, 1.0);
    r.p_value = kolmogorov_survival(std::sqrt(n) * r.statistic);
    r.reject_at_5pct = r.p_value < 0.05;
    return r;
}

}  // namespace carrytail::marginals
