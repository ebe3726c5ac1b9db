#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "carrytail/error.hpp"
#include "carrytail/marginals.hpp"

using namespace carrytail;
using namespace carrytail::marginals;

namespace {

// Y = u + b ln G with G ~ Gamma(k, 1).
std::vector<double> draw_lggd(const LggdParams& p, std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> g(p.k, 1.0);
    std::vector<double> y(n);
    for (auto& v : y) v = p.u + p.b * std::log(g(rng));
    return y;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

TEST(Lggd, DensityIntegratesToOneAndMatchesCdf) {
    for (const LggdParams p : {LggdParams{0.3, 0.1, 0.5}, LggdParams{2.0, 0.0, 1.0}, LggdParams{50.0, -1.0, 0.2}}) {
        auto pdf = [&](double y) { return std::exp(lggd_log_pdf(y, p)); };
        const double lo = p.u - 60.0 * p.b / std::min(1.0, p.k), hi = p.u + 8.0 * p.b + p.b * std::log(p.k + 1.0) * 2;
        EXPECT_NEAR(integrate(pdf, lo, hi), 1.0, 1e-8) << p.k;
        for (double q : {0.05, 0.5, 0.95}) {
            const double y = lggd_quantile(q, p);
            EXPECT_NEAR(integrate(pdf, lo, y), q, 1e-8);
            EXPECT_NEAR(lggd_cdf(y, p), q, 1e-12);
        }
    }
}

TEST(Lggd, ExtremeArgumentsStayFinite) {
    LggdParams p{2.0, 0.0, 1.0};
    EXPECT_EQ(lggd_cdf(1e4, p), 1.0);
    EXPECT_EQ(lggd_cdf(-1e4, p), 0.0);
    EXPECT_FALSE(std::isnan(lggd_log_pdf(1e4, p)));
    EXPECT_THROW((LggdParams{-1.0, 0.0, 1.0}.validate()), InputError);
}

TEST(Lggd, ProfileTransformRoundTrip) {
    LggdParams p{3.5, -0.2, 0.7};
    auto t = ProfileTransformedParams::from_lggd(p);
    EXPECT_NEAR(t.sigma_tilde, 0.7 / std::sqrt(3.5), 1e-15);
    auto back = t.to_lggd();
    EXPECT_NEAR(back.k, p.k, 1e-14);
    EXPECT_NEAR(back.u, p.u, 1e-14);
    EXPECT_NEAR(back.b, p.b, 1e-14);
}

TEST(Lggd, ProfileSolvesScoreEquation) {
    auto y = draw_lggd({2.0, 0.0, 1.0}, 2000, 3);
    for (double k : {0.2, 1.0, 5.0, 100.0}) {
        auto pt = profile_at(y, k);
        ASSERT_TRUE(pt.has_value()) << k;
        EXPECT_LT(std::abs(pt->residual), 1e-8);
        EXPECT_LT(std::abs(sigma_score(y, k, pt->transformed.sigma_tilde)), 1e-8);
        EXPECT_NEAR(pt->loglik, lggd_log_likelihood(y, pt->params), 1e-8 * std::abs(pt->loglik));
        // the profile point is a stationary point in (u, b) at fixed k
        const double h = 1e-5;
        for (int dim = 0; dim < 2; ++dim) {
            auto a = pt->params, b = pt->params;
            (dim ? a.b : a.u) += h;
            (dim ? b.b : b.u) -= h;
            const double g = (lggd_log_likelihood(y, a) - lggd_log_likelihood(y, b)) / (2 * h);
            EXPECT_LT(std::abs(g), 1e-3) << k << " " << dim;
        }
    }
}

TEST(Lggd, FitRecoversParameters) {
    auto y = draw_lggd({2.0, 0.5, 0.8}, 5000, 11);
    auto fit = fit_lggd(y, default_k_grid());
    EXPECT_GT(fit.loglik, lggd_log_likelihood(y, {2.0, 0.5, 0.8}) - 2.0);
    EXPECT_GT(fit.params.k, 1.0);
    EXPECT_LT(fit.params.k, 4.0);
    for (const auto& pt : fit.profile) EXPECT_LE(pt.loglik, fit.loglik);
    // u and k are strongly confounded: sd(u hat) is about 0.11 here
    auto fine = fit_lggd(y, geometric_grid(0.1, 1000.0, 400));
    EXPECT_NEAR(fine.params.u, 0.5, 0.35);
    EXPECT_NEAR(fine.params.b, 0.8, 0.1);
    EXPECT_GE(fine.loglik, lggd_log_likelihood(y, {2.0, 0.5, 0.8}));
}

TEST(Lggd, FitErrors) {
    std::vector<double> few(10, 0.1);
    EXPECT_THROW(fit_lggd(few, default_k_grid()), InputError);
    std::vector<double> constant(100, 0.3);
    EXPECT_ANY_THROW(fit_lggd(constant, default_k_grid()));
}

TEST(Lggd, GeometricGrid) {
    auto g = default_k_grid();
    ASSERT_EQ(g.size(), 40u);
    EXPECT_NEAR(g.front(), 0.1, 1e-14);
    EXPECT_NEAR(g.back(), 1000.0, 1e-10);
    EXPECT_NEAR(g[1] / g[0], g[20] / g[19], 1e-12);
}

TEST(LogNormal, FitAndMomentMatch) {
    std::vector<double> x{0.1, -0.2, 0.3, 0.05, -0.1};
    auto f = fit_lognormal(x);
    double m = 0, v = 0;
    for (double a : x) m += a / 5;
    for (double a : x) v += (a - m) * (a - m) / 5;
    EXPECT_NEAR(f.mean, m, 1e-15);
    EXPECT_NEAR(f.sd, std::sqrt(v), 1e-15);
    EXPECT_THROW(fit_lognormal(std::vector<double>{1.0}), InputError);

    for (double k : {0.5, 4.0, 200.0}) {
        auto p = lognormal_as_lggd(f, k);
        EXPECT_NEAR(p.u + p.b * boost::math::digamma(k), f.mean, 1e-12);
        EXPECT_NEAR(p.b * p.b * boost::math::trigamma(k), f.sd * f.sd, 1e-12);
    }
}

TEST(LogNormal, LggdApproachesNormalForLargeK) {
    LogNormalFit f{0.0, 1.0, 0.0};
    auto p = lognormal_as_lggd(f, 1e5);
    for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) EXPECT_NEAR(lggd_cdf(x, p), normal_cdf(x, 0.0, 1.0), 2e-3);
}

TEST(Ks, KolmogorovSurvival) {
    EXPECT_NEAR(kolmogorov_survival(1.3581), 0.05, 1e-4);
    EXPECT_NEAR(kolmogorov_survival(1.2238), 0.10, 1e-4);
    EXPECT_NEAR(kolmogorov_survival(1.6276), 0.01, 1e-4);
    EXPECT_NEAR(kolmogorov_survival(0.2), 1.0, 1e-12);
    EXPECT_NEAR(kolmogorov_survival(0.5), 0.963945, 1e-5);
}

TEST(Ks, StatisticByHand) {
    std::vector<double> x{0.1, 0.4, 0.7, 0.95, 0.2};
    auto r = ks_test(x, [](double u) { return u; });
    // sorted 0.1 0.2 0.4 0.7 0.95: D+ = max(i/n - x) = 0.2, D- = max(x - (i-1)/n) = 0.15
    EXPECT_NEAR(r.statistic, 0.2, 1e-15);
    EXPECT_EQ(r.reject_at_5pct, r.p_value < 0.05);
    EXPECT_THROW(ks_test(std::vector<double>{0.5}, [](double u) { return u; }), InputError);
}

TEST(Ks, UniformRejectionRateNearLevel) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int rejects = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(500);
        for (auto& v : x) v = U(rng);
        rejects += ks_test(x, [](double u) { return u; }).reject_at_5pct;
    }
    EXPECT_NEAR(rejects / double(trials), 0.05, 0.015);
}

TEST(Ks, HeavyTailRejectsLogNormal) {
    int rejects = 0;
    for (unsigned s = 0; s < 40; ++s) {
        auto y = draw_lggd({0.3, 0.0, 1.0}, 252, 100 + s);
        auto f = fit_lognormal(y);
        rejects += ks_test(y, [&](double x) { return normal_cdf(x, f.mean, f.sd); }).reject_at_5pct;
    }
    EXPECT_GT(rejects, 20);
}
