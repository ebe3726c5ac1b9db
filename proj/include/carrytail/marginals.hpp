#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace carrytail::marginals {

/// Log-generalized-gamma parameters: shape k, location u (= log alpha), scale b (= 1/beta).
struct LggdParams {
    double k = 1.0;
    double u = 0.0;
    double b = 1.0;

    /// Throws InputError unless k > 0, b > 0 and u finite.
    void validate() const;
};

/// Reparameterization used by the profile likelihood: sigma~ = b / sqrt(k), mu~ = u + b ln k.
struct ProfileTransformedParams {
    double mu_tilde = 0.0;
    double sigma_tilde = 1.0;
    double k = 1.0;

    LggdParams to_lggd() const;
    static ProfileTransformedParams from_lggd(const LggdParams& p);
};

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject_at_5pct = false;
};

double lggd_log_pdf(double y, const LggdParams& p);
double lggd_cdf(double y, const LggdParams& p);
/// Inverse of lggd_cdf via the inverse regularized incomplete gamma.
double lggd_quantile(double q, const LggdParams& p);
double lggd_log_likelihood(std::span<const double> ys, const LggdParams& p);

/// Geometric grid of `n` points spanning [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, int n);
/// 40 points from 0.1 to 1000.
std::vector<double> default_k_grid();

/// One point on the k-profile: the (mu~, sigma~) solving the score equations at fixed k.
struct ProfilePoint {
    double k = 0.0;
    ProfileTransformedParams transformed;
    LggdParams params;
    double loglik = 0.0;
    double residual = 0.0;  // score equation for sigma~ evaluated at the solution
};

struct LggdFit {
    LggdParams params;
    double loglik = 0.0;
    std::vector<ProfilePoint> profile;  // successful grid points, grid order
    std::vector<double> skipped_k;      // grid points where the sigma~ root could not be bracketed
};

/// Score equation for sigma~ at fixed k:
///   sum y_i e^{y_i/(s sqrt k)} / sum e^{y_i/(s sqrt k)} - mean(y) - s / sqrt(k).
double sigma_score(std::span<const double> ys, double k, double sigma_tilde);

/// Solves the profile equations at a single k; nullopt if sigma~ cannot be bracketed.
std::optional<ProfilePoint> profile_at(std::span<const double> ys, double k);

/// Profile-likelihood MLE over `k_grid`. Requires >= 20 finite samples.
LggdFit fit_lggd(std::span<const double> samples, std::span<const double> k_grid);

/// Normal MLE of log-samples (population standard deviation).
struct LogNormalFit {
    double mean = 0.0;
    double sd = 1.0;
    double loglik = 0.0;
};

LogNormalFit fit_lognormal(std::span<const double> log_samples);
double normal_cdf(double x, double mean, double sd);
double normal_log_pdf(double x, double mean, double sd);

/// The l.g.g.d. at shape `k` whose mean and variance match the fitted normal.
LggdParams lognormal_as_lggd(const LogNormalFit& fit, double k);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample K-S test; the p-value uses the asymptotic distribution of sqrt(n) D_n.
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

}  // namespace carrytail::marginals
