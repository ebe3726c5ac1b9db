#include <gtest/gtest.h>

#include <cmath>

#include "carrytail/copula.hpp"
#include "carrytail/error.hpp"
#include "carrytail/marginals.hpp"

using namespace carrytail;
using namespace carrytail::copula;

namespace {

const std::vector<CopulaSpec> kSpecs{CopulaSpec::clayton(2.0), CopulaSpec::clayton(0.2), CopulaSpec::frank(5.0),
                                     CopulaSpec::gumbel(1.5), CopulaSpec::gumbel(3.0), CopulaSpec::op_clayton(2.0, 2.0),
                                     CopulaSpec::op_clayton(0.5, 1.3)};

double empirical_cdf(const Matrix& m, std::span<const double> at) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        bool inside = true;
        for (std::size_t j = 0; j < at.size(); ++j) inside = inside && m(i, j) <= at[j];
        hits += inside;
    }
    return double(hits) / double(m.rows());
}

}  // namespace

TEST(Sampling, DeterministicPerSeed) {
    const auto a = sample(CopulaSpec::gumbel(2.0), 100, 3, 42);
    const auto b = sample(CopulaSpec::gumbel(2.0), 100, 3, 42);
    const auto c = sample(CopulaSpec::gumbel(2.0), 100, 3, 43);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == c);
}

TEST(Sampling, MarginsAreUniform) {
    for (const auto& s : kSpecs) {
        const auto m = sample(s, 20000, 3, 7);
        for (std::size_t j = 0; j < 3; ++j) {
            const auto col = m.column(j);
            for (double v : col) ASSERT_TRUE(v > 0.0 && v < 1.0);
            const auto ks = marginals::ks_test(col, [](double u) { return u; });
            EXPECT_GT(ks.p_value, 1e-3) << family_name(s.family) << " " << s.rho << " col " << j;
        }
    }
}

TEST(Sampling, JointCdfMatchesCopula) {
    const double pts[][3] = {{0.3, 0.3, 0.3}, {0.8, 0.5, 0.9}, {0.1, 0.7, 0.4}};
    for (const auto& s : kSpecs) {
        const auto m = sample(s, 40000, 3, 11);
        for (const auto& p : pts) {
            const double want = copula_cdf(s, UnitCubePoint(p));
            EXPECT_NEAR(empirical_cdf(m, p), want, 0.01) << family_name(s.family) << " " << s.rho;
        }
    }
}

TEST(Sampling, NegativeFrankTwoDimensions) {
    const auto s = CopulaSpec::frank(-4.0);
    const auto m = sample(s, 40000, 2, 5);
    const double p[2] = {0.4, 0.6};
    EXPECT_NEAR(empirical_cdf(m, p), copula_cdf(s, UnitCubePoint(p)), 0.01);
    EXPECT_NEAR(sample_kendall_tau(m.column(0), m.column(1)), kendall_tau(s), 0.02);
    EXPECT_THROW(sample(s, 10, 3, 1), UnsupportedError);
}

TEST(Sampling, MixtureJointCdf) {
    const MixtureSpec mix{{{CopulaSpec::clayton(2.0), 0.4}, {CopulaSpec::frank(3.0), 0.2}, {CopulaSpec::gumbel(2.0), 0.4}}};
    const auto m = sample(mix, 40000, 4, 3);
    const double p[4] = {0.5, 0.4, 0.7, 0.6};
    EXPECT_NEAR(empirical_cdf(m, p), mixture_cdf(mix, UnitCubePoint(p)), 0.01);
}

TEST(Sampling, LargeDimension) {
    const auto m = sample(CopulaSpec::clayton(1.0), 200, 25, 1);
    EXPECT_EQ(m.cols(), 25u);
    for (double v : m.data()) EXPECT_TRUE(v > 0.0 && v < 1.0);
}

TEST(Sampling, IndependenceLimit) {
    const auto m = sample(CopulaSpec::gumbel(1.0), 20000, 2, 2);
    EXPECT_NEAR(sample_kendall_tau(m.column(0), m.column(1)), 0.0, 0.02);
}

TEST(Sampling, Errors) {
    EXPECT_THROW(sample(CopulaSpec::clayton(1.0), 0, 2, 1), InputError);
    EXPECT_THROW(sample(CopulaSpec::clayton(1.0), 10, 1, 1), InputError);
}
