#include "carrytail/copula.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "carrytail/error.hpp"

namespace carrytail::copula {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this |rho| the Frank generator is replaced by its limit e^{-t}.
constexpr double kFrankIndependence = 1e-10;
constexpr double kLogExpm1Switch = 30.0;

std::atomic<std::uint64_t> g_clamp_events{0};

struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
        else comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

void check_order(int d) {
    if (d < 1 || d > kMaxDim) throw InputError("derivative order must be in 1..8");
}

bool frank_is_independent(double rho) { return std::abs(rho) < kFrankIndependence; }

// ln(e^a - 1) for a > 0.
double log_expm1(double a) { return a > kLogExpm1Switch ? a + std::log1p(-std::exp(-a)) : std::log(std::expm1(a)); }

// ln(1 - e^{-x}) for x > 0.
double log1mexp(double x) { return x > std::numbers::ln2 ? std::log1p(-std::exp(-x)) : std::log(-std::expm1(-x)); }

// Frank psi^{-1}(u) = -ln[(1 - e^{-rho u}) / (1 - e^{-rho})], kept accurate when rho u is large.
double frank_inverse(double rho, double u) {
    if (rho > 0.0) return log1mexp(rho) - log1mexp(rho * u);
    const double a = -rho;
    return a * (1.0 - u) + log1mexp(a) - log1mexp(a * u);
}

// ln(1 + e^x).
double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// sum_{i<k} ln(i + 1/rho), i.e. ln Gamma(k + 1/rho) - ln Gamma(1/rho).
double log_rising(double inv_rho, int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += std::log(i + inv_rho);
    return s;
}

// ---- ln((-1)^d psi^(d)) per family, from t-space summaries ----

double clayton_log_deriv(double rho, int d, double log1p_t) {
    return log_rising(1.0 / rho, d) - (d + 1.0 / rho) * log1p_t;
}

double gumbel_log_deriv(double rho, int d, double log_t, std::span<const double> a) {
    const double log_s = log_t / rho;  // s = t^(1/rho)
    std::array<double, kMaxDim> terms{};
    for (int k = 1; k <= d; ++k) terms[k - 1] = std::log(a[k - 1]) + k * log_s;
    return -std::exp(log_s) - d * log_t + detail::log_sum_exp({terms.data(), static_cast<std::size_t>(d)});
}

double opclayton_log_deriv(double rho, double beta, int d, double log_t, std::span<const double> a) {
    const double log_s = log_t / beta;  // s = t^(1/beta)
    const double log1p_s = log1p_exp(log_s);
    const double inv_rho = 1.0 / rho;
    std::array<double, kMaxDim> terms{};
    double rising = 0.0;
    for (int k = 1; k <= d; ++k) {
        rising += std::log(k - 1 + inv_rho);
        terms[k - 1] = std::log(a[k - 1]) + rising - (k + inv_rho) * log1p_s + k * log_s;
    }
    return detail::log_sum_exp({terms.data(), static_cast<std::size_t>(d)}) - d * log_t;
}

// Signed (-1)^d psi^(d)(t) for Frank: (1/rho) Li_{-(d-1)}(z), z = (1 - e^{-rho}) e^{-t}.
// Returned as (log |value|, sign).
std::pair<double, int> frank_log_deriv(double rho, int d, double t) {
    const double z = -std::expm1(-rho) * std::exp(-t);
    const double one_minus_z = -std::expm1(-t) + std::exp(-rho - t);
    const auto& num = polylog_numerator(d - 1);  // num[0] == 0; A(z) = N(z) / z
    double a = 0.0;
    for (std::size_t i = num.size(); i-- > 1;) a = a * z + num[i];
    const double prefactor = z * a / rho;
    if (prefactor == 0.0 || !std::isfinite(prefactor)) return {-kInf, 0};
    return {std::log(std::abs(prefactor)) - d * std::log(one_minus_z), prefactor > 0.0 ? 1 : -1};
}

// ln(1 + t) for Clayton with t = sum(u_j^{-rho} - 1), stable for tiny and huge t.
double clayton_log1p_t(double rho, std::span<const detail::CoordLogs> u) {
    double amax = -kInf;
    for (const auto& c : u) amax = std::max(amax, -rho * c.log_u);
    if (amax < kLogExpm1Switch) {
        NeumaierSum t;
        for (const auto& c : u) t.add(std::expm1(-rho * c.log_u));
        return std::log1p(t.value());
    }
    double s = 0.0;
    for (const auto& c : u) s += std::exp(-rho * c.log_u - amax);
    s -= (static_cast<double>(u.size()) - 1.0) * std::exp(-amax);
    return amax + std::log(s);
}

double gumbel_log_t(double rho, std::span<const detail::CoordLogs> u) {
    std::array<double, kMaxDim> x{};
    for (std::size_t j = 0; j < u.size(); ++j) x[j] = rho * u[j].log_neg_log;
    return detail::log_sum_exp({x.data(), u.size()});
}

// ln t and per-coordinate ln(u^{-rho} - 1) for OpClayton.
double opclayton_log_t(double rho, double beta, std::span<const detail::CoordLogs> u, std::span<double> w) {
    std::array<double, kMaxDim> x{};
    for (std::size_t j = 0; j < u.size(); ++j) {
        w[j] = log_expm1(-rho * u[j].log_u);
        x[j] = beta * w[j];
    }
    return detail::log_sum_exp({x.data(), u.size()});
}

double frank_t(double rho, std::span<const detail::CoordLogs> u) {
    NeumaierSum t;
    for (const auto& c : u) t.add(frank_inverse(rho, c.u));
    return t.value();
}

std::array<detail::CoordLogs, kMaxDim> logs_of(const UnitCubePoint& p) {
    std::array<detail::CoordLogs, kMaxDim> out{};
    for (std::size_t j = 0; j < p.dim(); ++j) out[j] = detail::coord_logs(p.coords()[j]);
    return out;
}

}  // namespace

std::string_view family_name(Family f) {
    switch (f) {
        case Family::Clayton: return "clayton";
        case Family::Frank: return "frank";
        case Family::Gumbel: return "gumbel";
        case Family::OpClayton: return "opclayton";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "clayton") return Family::Clayton;
    if (s == "frank") return Family::Frank;
    if (s == "gumbel") return Family::Gumbel;
    if (s == "opclayton" || s == "op-clayton" || s == "op_clayton") return Family::OpClayton;
    throw InputError("unknown copula family '" + std::string(name) + "'");
}

void CopulaSpec::validate() const {
    if (!std::isfinite(rho)) throw InputError("copula parameter rho must be finite");
    switch (family) {
        case Family::Clayton:
            if (!(rho > 0.0)) throw InputError("Clayton requires rho > 0");
            break;
        case Family::Gumbel:
            if (!(rho >= 1.0)) throw InputError("Gumbel requires rho >= 1");
            break;
        case Family::Frank:
            if (rho == 0.0) throw InputError("Frank requires rho != 0");
            break;
        case Family::OpClayton:
            if (!(rho > 0.0)) throw InputError("OpClayton requires rho > 0");
            if (!(beta >= 1.0) || !std::isfinite(beta)) throw InputError("OpClayton requires beta >= 1");
            break;
    }
}

void MixtureSpec::validate() const {
    if (components.empty()) throw InputError("mixture has no components");
    double total = 0.0;
    for (const auto& c : components) {
        c.spec.validate();
        if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw InputError("mixture weight outside [0,1]");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InputError("mixture weights must sum to 1");
}

UnitCubePoint::UnitCubePoint(std::span<const double> u) : u_(u) {
    if (u.size() < 2 || u.size() > static_cast<std::size_t>(kMaxDim))
        throw InputError("unit cube point dimension must be in 2..8");
    for (double x : u)
        if (!(x > 0.0 && x < 1.0)) throw InputError("unit cube coordinates must lie strictly inside (0,1)");
}

std::uint64_t clamp_events() { return g_clamp_events.load(std::memory_order_relaxed); }

bool is_independence(const CopulaSpec& spec) {
    switch (spec.family) {
        case Family::Gumbel: return spec.rho == 1.0;
        case Family::Frank: return frank_is_independent(spec.rho);
        default: return false;
    }
}

// ---- generators ----

double generator(const CopulaSpec& spec, double t) {
    if (!(t >= 0.0)) throw InputError("generator requires t >= 0");
    if (t == kInf) return 0.0;
    switch (spec.family) {
        case Family::Clayton: return std::exp(-std::log1p(t) / spec.rho);
        case Family::Gumbel: return std::exp(-std::pow(t, 1.0 / spec.rho));
        case Family::Frank:
            if (frank_is_independent(spec.rho)) return std::exp(-t);
            if (const double x = std::exp(-t) * std::expm1(-spec.rho); std::abs(x) < 0.5) return -std::log1p(x) / spec.rho;
            return -std::log(-std::expm1(-t) + std::exp(-spec.rho - t)) / spec.rho;
        case Family::OpClayton: return std::exp(-std::log1p(std::pow(t, 1.0 / spec.beta)) / spec.rho);
    }
    return 0.0;
}

double inverse_generator(const CopulaSpec& spec, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw InputError("inverse_generator requires 0 < s <= 1");
    switch (spec.family) {
        case Family::Clayton: return std::expm1(-spec.rho * std::log(s));
        case Family::Gumbel: return std::pow(-std::log(s), spec.rho);
        case Family::Frank:
            if (frank_is_independent(spec.rho)) return -std::log(s);
            return frank_inverse(spec.rho, s);
        case Family::OpClayton: return std::pow(std::expm1(-spec.rho * std::log(s)), spec.beta);
    }
    return 0.0;
}

double inverse_generator_deriv(const CopulaSpec& spec, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw InputError("inverse_generator_deriv requires 0 < s <= 1");
    const double rho = spec.rho;
    switch (spec.family) {
        case Family::Clayton: return -rho * std::exp((-rho - 1.0) * std::log(s));
        case Family::Gumbel: return -rho * std::pow(-std::log(s), rho - 1.0) / s;
        case Family::Frank:
            if (frank_is_independent(rho)) return -1.0 / s;
            return -rho / std::expm1(rho * s);
        case Family::OpClayton:
            return spec.beta * std::pow(std::expm1(-rho * std::log(s)), spec.beta - 1.0) * -rho *
                   std::exp((-rho - 1.0) * std::log(s));
    }
    return 0.0;
}

std::vector<double> adk_coefficients(int d, double alpha) {
    check_order(d);
    // a_{11} = alpha;  a_{d+1,k} = alpha a_{d,k-1} + (d - alpha k) a_{d,k}.
    std::vector<double> a{alpha};
    for (int m = 1; m < d; ++m) {
        std::vector<double> next(static_cast<std::size_t>(m) + 1, 0.0);
        for (int k = 1; k <= m + 1; ++k) {
            double v = 0.0;
            if (k >= 2) v += alpha * a[k - 2];
            if (k <= m) v += (m - alpha * k) * a[k - 1];
            next[k - 1] = v;
        }
        a = std::move(next);
    }
    return a;
}

double log_abs_generator_deriv(const CopulaSpec& spec, double t, int d) {
    check_order(d);
    if (!(t > 0.0)) throw InputError("generator derivative requires t > 0");
    switch (spec.family) {
        case Family::Clayton: return clayton_log_deriv(spec.rho, d, std::log1p(t));
        case Family::Gumbel: {
            const auto a = adk_coefficients(d, 1.0 / spec.rho);
            return gumbel_log_deriv(spec.rho, d, std::log(t), a);
        }
        case Family::OpClayton: {
            const auto a = adk_coefficients(d, 1.0 / spec.beta);
            return opclayton_log_deriv(spec.rho, spec.beta, d, std::log(t), a);
        }
        case Family::Frank: {
            if (frank_is_independent(spec.rho)) return -t;
            const auto [lv, sign] = frank_log_deriv(spec.rho, d, t);
            if (sign <= 0) throw NumericalError("Frank generator derivative is not of alternating sign here");
            return lv;
        }
    }
    return 0.0;
}

double generator_deriv(const CopulaSpec& spec, double t, int d) {
    check_order(d);
    if (!(t > 0.0)) throw InputError("generator derivative requires t > 0");
    const double sign = (d % 2 == 0) ? 1.0 : -1.0;
    if (spec.family == Family::Frank && !frank_is_independent(spec.rho)) {
        const auto [lv, s] = frank_log_deriv(spec.rho, d, t);
        return sign * s * std::exp(lv);
    }
    return sign * std::exp(log_abs_generator_deriv(spec, t, d));
}

// ---- density kernels ----

namespace detail {

double log_sum_exp(std::span<const double> xs) {
    double m = -kInf;
    for (double x : xs) m = std::max(m, x);
    if (m == -kInf || m == kInf) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

CoordLogs coord_logs(double u) {
    if (u < kClampBound || u > 1.0 - kClampBound) {
        g_clamp_events.fetch_add(1, std::memory_order_relaxed);
        u = std::clamp(u, kClampBound, 1.0 - kClampBound);
    }
    const double lu = std::log(u);
    return {u, lu, std::log(-lu)};
}

double log_density_kernel(const CopulaSpec& spec, std::span<const CoordLogs> u, std::span<const double> a_dk) {
    const int d = static_cast<int>(u.size());
    const double rho = spec.rho;
    switch (spec.family) {
        case Family::Clayton: {
            double sum_log_u = 0.0;
            for (const auto& c : u) sum_log_u += c.log_u;
            double lead = 0.0;
            for (int k = 1; k < d; ++k) lead += std::log1p(k * rho);
            return lead - (d + 1.0 / rho) * clayton_log1p_t(rho, u) - (rho + 1.0) * sum_log_u;
        }
        case Family::Gumbel: {
            if (rho == 1.0) return 0.0;
            double jac = 0.0;
            for (const auto& c : u) jac += (rho - 1.0) * c.log_neg_log - c.log_u;
            return gumbel_log_deriv(rho, d, gumbel_log_t(rho, u), a_dk) + d * std::log(rho) + jac;
        }
        case Family::OpClayton: {
            std::array<double, kMaxDim> w{};
            const double log_t = opclayton_log_t(rho, spec.beta, u, {w.data(), u.size()});
            double jac = d * (std::log(spec.beta) + std::log(rho));
            for (int j = 0; j < d; ++j) jac += (spec.beta - 1.0) * w[j] - (rho + 1.0) * u[j].log_u;
            return opclayton_log_deriv(rho, spec.beta, d, log_t, a_dk) + jac;
        }
        case Family::Frank: {
            if (frank_is_independent(rho)) return 0.0;
            if (rho < 0.0 && d > 2) throw UnsupportedError("Frank with negative rho is only a copula for d = 2");
            const auto [lv, sign] = frank_log_deriv(rho, d, frank_t(rho, u));
            if (sign <= 0) throw NumericalError("Frank density not positive");
            double jac = d * std::log(std::abs(rho));
            for (const auto& c : u) jac -= std::log(std::abs(std::expm1(rho * c.u)));
            return lv + jac;
        }
    }
    return 0.0;
}

}  // namespace detail

double copula_log_density(const CopulaSpec& spec, const UnitCubePoint& u) {
    const auto logs = logs_of(u);
    const std::span<const detail::CoordLogs> view{logs.data(), u.dim()};
    const int d = static_cast<int>(u.dim());
    switch (spec.family) {
        case Family::Gumbel: return detail::log_density_kernel(spec, view, adk_coefficients(d, 1.0 / spec.rho));
        case Family::OpClayton: return detail::log_density_kernel(spec, view, adk_coefficients(d, 1.0 / spec.beta));
        default: return detail::log_density_kernel(spec, view, {});
    }
}

double copula_cdf(const CopulaSpec& spec, const UnitCubePoint& u) {
    const auto logs = logs_of(u);
    const std::span<const detail::CoordLogs> view{logs.data(), u.dim()};
    const double rho = spec.rho;
    switch (spec.family) {
        case Family::Clayton: return std::exp(-clayton_log1p_t(rho, view) / rho);
        case Family::Gumbel: return std::exp(-std::exp(gumbel_log_t(rho, view) / rho));
        case Family::OpClayton: {
            std::array<double, kMaxDim> w{};
            const double log_t = opclayton_log_t(rho, spec.beta, view, {w.data(), u.dim()});
            return std::exp(-log1p_exp(log_t / spec.beta) / rho);
        }
        case Family::Frank: {
            if (frank_is_independent(rho)) {
                double p = 1.0;
                for (double x : u.coords()) p *= x;
                return p;
            }
            if (rho < 0.0 && u.dim() > 2) throw UnsupportedError("Frank with negative rho is only a copula for d = 2");
            return generator(spec, frank_t(rho, view));
        }
    }
    return 0.0;
}

double mixture_cdf(const MixtureSpec& mix, const UnitCubePoint& u) {
    double c = 0.0;
    for (const auto& comp : mix.components)
        if (comp.weight > 0.0) c += comp.weight * copula_cdf(comp.spec, u);
    return c;
}

double mixture_log_density(const MixtureSpec& mix, const UnitCubePoint& u) {
    std::vector<double> terms;
    terms.reserve(mix.components.size());
    for (const auto& comp : mix.components) {
        if (comp.weight <= 0.0) continue;
        terms.push_back(std::log(comp.weight) + copula_log_density(comp.spec, u));
    }
    return detail::log_sum_exp(terms);
}

// ---- dependence measures ----

double debye1(double x) {
    if (x == 0.0) return 1.0;
    auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    const double lo = std::min(0.0, x), hi = std::max(0.0, x);
    const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-14);
    return (x > 0.0 ? integral : -integral) / x;
}

double kendall_tau(const CopulaSpec& spec) {
    spec.validate();
    const double rho = spec.rho;
    switch (spec.family) {
        case Family::Clayton: return rho / (rho + 2.0);
        case Family::Gumbel: return 1.0 - 1.0 / rho;
        case Family::OpClayton: return 1.0 - 2.0 / (spec.beta * (rho + 2.0));
        case Family::Frank:
            if (frank_is_independent(rho)) return 0.0;
            // Series near zero avoids the 4/rho cancellation.
            if (std::abs(rho) < 1e-2) return rho / 9.0 - rho * rho * rho / 900.0;
            return 1.0 - 4.0 / rho + 4.0 * debye1(rho) / rho;
    }
    return 0.0;
}

namespace {

// Counts inversions in v[lo, hi) while merge sorting it.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace

double sample_kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("sample_kendall_tau needs two equal columns, n >= 2");
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const double discordant = static_cast<double>(merge_count(ys, buf, 0, n));
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return (pairs - 2.0 * discordant) / pairs;
}

}  // namespace carrytail::copula
