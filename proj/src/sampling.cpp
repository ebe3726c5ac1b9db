#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "carrytail/copula.hpp"
#include "carrytail/error.hpp"

namespace carrytail::copula {
namespace {

using Rng = std::mt19937_64;

const double kUpper = std::nextafter(1.0, 0.0);
constexpr double kLower = 1e-300;

// Uniform on the open interval (0, 1).
double open_uniform(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

double exponential(Rng& rng) { return -std::log(open_uniform(rng)); }

double clamp_unit(double u) {
    if (!(u > kLower)) return kLower;
    return u > kUpper ? kUpper : u;
}

// ln of a positive stable variate with Laplace transform exp(-t^alpha), 0 < alpha < 1 (Kanter).
double log_positive_stable(double alpha, Rng& rng) {
    if (alpha >= 1.0) return 0.0;
    const double theta = std::numbers::pi * open_uniform(rng);
    const double w = exponential(rng);
    return std::log(std::sin(alpha * theta)) - std::log(std::sin(theta)) / alpha +
           (1.0 - alpha) / alpha * (std::log(std::sin((1.0 - alpha) * theta)) - std::log(w));
}

double log_gamma_variate(double shape, Rng& rng) {
    std::gamma_distribution<double> g(shape, 1.0);
    const double v = g(rng);
    if (v > 0.0) return std::log(v);
    // Shape far below 1 can underflow; use Gamma(a) = Gamma(a+1) U^(1/a) in logs.
    std::gamma_distribution<double> g1(shape + 1.0, 1.0);
    return std::log(g1(rng)) + std::log(open_uniform(rng)) / shape;
}

// Logarithmic series variate with P(V = k) = -p^k / (k ln(1 - p)), where ln(1 - p) = log_q (Kemp).
std::uint64_t log_series(double p, double log_q, Rng& rng) {
    const double v = open_uniform(rng);
    if (v > p) return 1;
    const double q = -std::expm1(log_q * open_uniform(rng));
    if (v < q * q) {
        const double k = std::floor(1.0 + std::log(v) / std::log(q));
        return k < 1.0 ? 1 : static_cast<std::uint64_t>(std::min(k, 1e18));
    }
    return v > q ? 1 : 2;
}

void sample_row(const CopulaSpec& spec, std::span<double> out, Rng& rng) {
    const std::size_t d = out.size();
    const double rho = spec.rho;
    switch (spec.family) {
        case Family::Clayton: {
            const double log_v = log_gamma_variate(1.0 / rho, rng);
            for (auto& u : out) {
                const double log_t = std::log(exponential(rng)) - log_v;
                // psi(t) = (1 + t)^{-1/rho}
                const double l1p = log_t > 0.0 ? log_t + std::log1p(std::exp(-log_t)) : std::log1p(std::exp(log_t));
                u = clamp_unit(std::exp(-l1p / rho));
            }
            return;
        }
        case Family::Gumbel: {
            const double alpha = 1.0 / rho;
            const double log_v = log_positive_stable(alpha, rng);
            for (auto& u : out) u = clamp_unit(std::exp(-std::exp(alpha * (std::log(exponential(rng)) - log_v))));
            return;
        }
        case Family::OpClayton: {
            const double log_v = log_positive_stable(1.0 / spec.beta, rng) + spec.beta * log_gamma_variate(1.0 / rho, rng);
            for (auto& u : out) {
                const double log_s = (std::log(exponential(rng)) - log_v) / spec.beta;
                const double l1p = log_s > 0.0 ? log_s + std::log1p(std::exp(-log_s)) : std::log1p(std::exp(log_s));
                u = clamp_unit(std::exp(-l1p / rho));
            }
            return;
        }
        case Family::Frank: {
            if (is_independence(spec)) {
                for (auto& u : out) u = open_uniform(rng);
                return;
            }
            if (rho > 0.0) {
                const double v = static_cast<double>(log_series(-std::expm1(-rho), -rho, rng));
                for (auto& u : out) u = clamp_unit(generator(spec, exponential(rng) / v));
                return;
            }
            if (d != 2) throw UnsupportedError("Frank with negative rho can only be sampled for d = 2");
            // Conditional inversion of C(v | u).
            const double u1 = open_uniform(rng);
            const double w = open_uniform(rng);
            const double a = std::exp(-rho * u1);
            const double k = std::expm1(-rho);
            out[0] = u1;
            out[1] = clamp_unit(-std::log1p(w * k / (w + (1.0 - w) * a)) / rho);
            return;
        }
    }
}

void check_shape(std::size_t n, std::size_t d) {
    if (n < 1) throw InputError("sample size must be at least 1");
    if (d < 2) throw InputError("sample dimension must be at least 2");
}

}  // namespace

Matrix sample(const CopulaSpec& spec, std::size_t n, std::size_t d, std::uint64_t seed) {
    spec.validate();
    check_shape(n, d);
    if (spec.family == Family::Frank && spec.rho < 0.0 && !is_independence(spec) && d != 2)
        throw UnsupportedError("Frank with negative rho can only be sampled for d = 2");
    Rng rng(seed);
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) sample_row(spec, m.row(i), rng);
    return m;
}

Matrix sample(const MixtureSpec& mix, std::size_t n, std::size_t d, std::uint64_t seed) {
    mix.validate();
    check_shape(n, d);
    for (const auto& c : mix.components)
        if (c.weight > 0.0 && c.spec.family == Family::Frank && c.spec.rho < 0.0 && !is_independence(c.spec) && d != 2)
            throw UnsupportedError("Frank with negative rho can only be sampled for d = 2");
    Rng rng(seed);
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = open_uniform(rng);
        double acc = 0.0;
        std::size_t which = mix.components.size() - 1;
        for (std::size_t c = 0; c < mix.components.size(); ++c) {
            acc += mix.components[c].weight;
            if (pick < acc) {
                which = c;
                break;
            }
        }
        while (mix.components[which].weight <= 0.0 && which > 0) --which;
        sample_row(mix.components[which].spec, m.row(i), rng);
    }
    return m;
}

}  // namespace carrytail::copula
