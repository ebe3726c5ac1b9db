#include "carrytail/tail_dependence.hpp"

#include <algorithm>
#include <cmath>

#include "carrytail/error.hpp"

namespace carrytail::td {
namespace {

long double binom(int n, int k) {
    long double r = 1.0L;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// sum_{i=1..m} (-1)^i C(m,i) i^alpha
long double alt_power_sum(int m, long double alpha) {
    long double s = 0.0L;
    for (int i = 1; i <= m; ++i) s += ((i % 2) ? -1.0L : 1.0L) * binom(m, i) * std::pow(static_cast<long double>(i), alpha);
    return s;
}

// Generators with psi(0) = 1 expanded as 1 - c t^alpha near zero.
double power_upper(long double alpha, int d, int h) {
    if (alpha >= 1.0L) return 0.0;
    const long double num = alt_power_sum(d, alpha);
    const long double den = alt_power_sum(d - h, alpha);
    if (den == 0.0L) return 0.0;
    return std::clamp(static_cast<double>(num / den), 0.0, 1.0);
}

// psi(s) - 1 without cancellation.
long double psi_minus_one(const copula::CopulaSpec& spec, long double s) {
    using std::expm1, std::log1p, std::pow;
    const long double rho = spec.rho;
    switch (spec.family) {
        case copula::Family::Clayton: return expm1(-log1p(s) / rho);
        case copula::Family::Gumbel: return expm1(-pow(s, 1.0L / rho));
        case copula::Family::OpClayton: return expm1(-log1p(pow(s, 1.0L / spec.beta)) / rho);
        case copula::Family::Frank: return -log1p(expm1(rho) * -expm1(-s)) / rho;
    }
    return 0.0L;
}

// Joint survival of m coordinates at level u = psi(t), less its constant term.
long double survival(const copula::CopulaSpec& spec, int m, long double t) {
    long double s = 0.0L;
    for (int i = 1; i <= m; ++i) s += ((i % 2) ? -1.0L : 1.0L) * binom(m, i) * psi_minus_one(spec, i * t);
    return s;
}

}  // namespace

void TdQuery::validate() const {
    if (d < 2 || d > copula::kMaxDim) throw InputError("tail dependence dimension must be in 2..8");
    if (h < 1 || h >= d) throw InputError("tail dependence split h must satisfy 1 <= h < d");
}

double td_single(const copula::CopulaSpec& spec, const TdQuery& q) {
    spec.validate();
    q.validate();
    const double ratio = static_cast<double>(q.d) / (q.d - q.h);
    switch (spec.family) {
        case copula::Family::Clayton:
            return q.side == Side::Lower ? std::pow(ratio, -1.0 / spec.rho) : 0.0;
        case copula::Family::OpClayton:
            if (q.side == Side::Lower) return std::pow(ratio, -1.0 / (spec.rho * spec.beta));
            return power_upper(1.0L / spec.beta, q.d, q.h);
        case copula::Family::Gumbel:
            return q.side == Side::Upper ? power_upper(1.0L / spec.rho, q.d, q.h) : 0.0;
        case copula::Family::Frank:
            return 0.0;
    }
    return 0.0;
}

double td_mixture(const copula::MixtureSpec& mix, const TdQuery& q) {
    mix.validate();
    double s = 0.0;
    for (const auto& c : mix.components) s += c.weight * td_single(c.spec, q);
    return std::clamp(s, 0.0, 1.0);
}

double td_upper_numeric(const copula::CopulaSpec& spec, int d, int h, double t) {
    spec.validate();
    TdQuery{d, h, Side::Upper}.validate();
    if (spec.family == copula::Family::Frank && spec.rho < 0.0) return 0.0;
    const long double num = survival(spec, d, t);
    const long double den = survival(spec, d - h, t);
    if (den == 0.0L) return 0.0;
    return std::clamp(static_cast<double>(num / den), 0.0, 1.0);
}

double td_empirical(const Matrix& samples, const TdQuery& q, double threshold) {
    q.validate();
    if (samples.cols() != static_cast<std::size_t>(q.d)) throw InputError("sample dimension does not match query");
    if (!(threshold > 0.0 && threshold < 1.0)) throw InputError("threshold must lie in (0,1)");
    auto beyond = [&](double u) { return q.side == Side::Upper ? u > threshold : u < threshold; };
    std::size_t joint = 0, cond = 0;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        const auto row = samples.row(i);
        if (!std::all_of(row.begin() + q.h, row.end(), beyond)) continue;
        ++cond;
        if (std::all_of(row.begin(), row.begin() + q.h, beyond)) ++joint;
    }
    return cond == 0 ? 0.0 : static_cast<double>(joint) / static_cast<double>(cond);
}

TailDependenceSeries td_series(const std::vector<estimation::WindowFit>& fits, const std::string& basket_side) {
    TailDependenceSeries out;
    out.basket_side = basket_side;
    for (const auto& f : fits) {
        const int d = static_cast<int>(f.basket.size());
        if (d < 2) throw InputError("fit on " + f.end_date.iso() + " has fewer than two basket currencies");
        out.dates.push_back(f.end_date);
        out.dims.push_back(d);
        out.upper.push_back(td_mixture(f.mixture, {d, 1, Side::Upper}));
        out.lower.push_back(td_mixture(f.mixture, {d, 1, Side::Lower}));
    }
    return out;
}

}  // namespace carrytail::td
