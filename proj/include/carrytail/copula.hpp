#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carrytail/matrix.hpp"

namespace carrytail::copula {

inline constexpr int kMaxDim = 8;

enum class Family { Clayton, Frank, Gumbel, OpClayton };

std::string_view family_name(Family f);
/// Accepts "clayton", "frank", "gumbel", "opclayton" (case-insensitive).
Family parse_family(std::string_view name);

/// One Archimedean copula: generator psi and its parameters.
///
/// Parameter domains: Clayton rho > 0; Gumbel rho >= 1; Frank rho != 0 (negative
/// admissible in two dimensions only); OpClayton rho > 0 and beta >= 1, where the
/// generator is the Clayton generator applied to t^(1/beta).
struct CopulaSpec {
    Family family = Family::Clayton;
    double rho = 1.0;
    double beta = 1.0;  // OpClayton only

    static CopulaSpec clayton(double rho) { return {Family::Clayton, rho, 1.0}; }
    static CopulaSpec frank(double rho) { return {Family::Frank, rho, 1.0}; }
    static CopulaSpec gumbel(double rho) { return {Family::Gumbel, rho, 1.0}; }
    static CopulaSpec op_clayton(double rho, double beta) { return {Family::OpClayton, rho, beta}; }

    void validate() const;
    bool operator==(const CopulaSpec&) const = default;
};

struct MixtureComponent {
    CopulaSpec spec;
    double weight = 1.0;
    bool operator==(const MixtureComponent&) const = default;
};

/// Convex combination of copulas. Weights lie in [0,1] and sum to one within 1e-12.
struct MixtureSpec {
    std::vector<MixtureComponent> components;

    static MixtureSpec single(const CopulaSpec& spec) { return {{{spec, 1.0}}}; }
    void validate() const;
    bool operator==(const MixtureSpec&) const = default;
};

/// Validated view of a point strictly inside the unit cube, 2 <= d <= 8.
class UnitCubePoint {
public:
    explicit UnitCubePoint(std::span<const double> u);
    std::span<const double> coords() const { return u_; }
    std::size_t dim() const { return u_.size(); }

private:
    std::span<const double> u_;
};

// Generators ---------------------------------------------------------------

double generator(const CopulaSpec& spec, double t);
double inverse_generator(const CopulaSpec& spec, double s);
/// d/ds of the inverse generator (negative on (0,1)).
double inverse_generator_deriv(const CopulaSpec& spec, double s);

/// d-th derivative psi^(d)(t), 1 <= d <= 8, t > 0. Carries the sign (-1)^d.
double generator_deriv(const CopulaSpec& spec, double t, int d);
/// ln((-1)^d psi^(d)(t)); throws NumericalError if that quantity is not positive.
double log_abs_generator_deriv(const CopulaSpec& spec, double t, int d);

/// Coefficients a_{d1..dd}(alpha) of the Gumbel / outer-power derivative polynomial.
std::vector<double> adk_coefficients(int d, double alpha);

/// Li_{-n}(z) for |z| < 1 as an exact rational function of z.
double polylog_neg_int(int n, double z);
/// Same rational function continued to every z < 1 (used for negative-rho Frank).
double polylog_neg_int_continued(int n, double z);
/// Numerator N_n with Li_{-n}(z) = N_n(z) / (1 - z)^(n+1); coefficient i multiplies z^i.
const std::vector<double>& polylog_numerator(int n);

// Copula functions -------------------------------------------------------

/// Lower clamp bound for coordinates before evaluation; upper is 1 - bound.
inline constexpr double kClampBound = 1e-12;
/// Number of coordinates clamped into [1e-12, 1-1e-12] since process start.
std::uint64_t clamp_events();

double copula_cdf(const CopulaSpec& spec, const UnitCubePoint& u);
double copula_log_density(const CopulaSpec& spec, const UnitCubePoint& u);
double mixture_cdf(const MixtureSpec& mix, const UnitCubePoint& u);
double mixture_log_density(const MixtureSpec& mix, const UnitCubePoint& u);

/// True when the spec is (numerically) the independence copula.
bool is_independence(const CopulaSpec& spec);

// Dependence measures ------------------------------------------------------

/// Debye function D_1(x) = (1/x) int_0^x t/(e^t - 1) dt, by Gauss-Kronrod quadrature.
double debye1(double x);
double kendall_tau(const CopulaSpec& spec);
/// Sample Kendall's tau of two columns in O(n log n) (Knight's algorithm, no tie correction).
double sample_kendall_tau(std::span<const double> x, std::span<const double> y);

// Sampling -----------------------------------------------------------------

/// n x d draws via the Marshall-Olkin frailty construction. Deterministic in seed.
Matrix sample(const CopulaSpec& spec, std::size_t n, std::size_t d, std::uint64_t seed);
Matrix sample(const MixtureSpec& mix, std::size_t n, std::size_t d, std::uint64_t seed);

namespace detail {

/// Per-coordinate logs shared by all families' density kernels.
struct CoordLogs {
    double u;
    double log_u;       // ln u
    double log_neg_log; // ln(-ln u)
};

CoordLogs coord_logs(double u);

/// Log density from precomputed coordinate logs; the estimation hot path.
/// a_dk must be adk_coefficients(d, alpha) for Gumbel (alpha = 1/rho) or OpClayton (alpha = 1/beta).
double log_density_kernel(const CopulaSpec& spec, std::span<const CoordLogs> u, std::span<const double> a_dk);

double log_sum_exp(std::span<const double> xs);

}  // namespace detail

}  // namespace carrytail::copula
