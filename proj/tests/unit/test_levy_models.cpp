#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "levymlmc/levy_models.hpp"

using namespace levymlmc;

namespace {

LevyModel1D paper_hem() { return LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.05}); }
LevyModel1D cgmy15() { return LevyModel1D::cgmy({0.007, 2.0, 4.0, 1.5}); }
LevyModel1D paper_vg() { return LevyModel1D::vg({0.1, 0.06, 0.1}); }

double oracle_tail(const LevyModel1D& m, double x) {
    boost::math::quadrature::exp_sinh<double> es;
    if (x > 0) return es.integrate([&](double t) { return m.density(t); }, x, INFINITY);
    return -es.integrate([&](double t) { return m.density(-t); }, -x, INFINITY);
}

double oracle_segment(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, a, b);
}

// Direct Variance-Gamma Lévy density, independent of the CGMY mapping.
double vg_density(const VgParams& p, double x) {
    const double s2 = p.sigma * p.sigma;
    const double k = std::sqrt(2.0 / p.nu + p.theta * p.theta / s2) / p.sigma;
    return std::exp(p.theta * x / s2 - k * std::fabs(x)) / (p.nu * std::fabs(x));
}

}  // namespace

TEST(LevyModels, HemTailNegativeSide) {
    const auto m = paper_hem();
    // Frozen: 1.2·e^{−5}.
    EXPECT_NEAR(m.tail_integral(-0.2), -0.0080855363989026, 1e-15);
    EXPECT_NEAR(m.tail_integral(-0.2), oracle_tail(m, -0.2), 1e-12);
    EXPECT_NEAR(m.tail_integral(0.1), 1.8 * std::exp(-2.0), 1e-14);
}

TEST(LevyModels, HemIntervalMass) {
    const auto m = paper_hem();
    const double oracle = oracle_segment([&](double t) { return m.density(t); }, 0.09, 0.11);
    EXPECT_NEAR(m.interval_mass(0.09, 0.11), 0.0980923137466548, 1e-15);
    EXPECT_NEAR(m.interval_mass(0.09, 0.11), oracle, 1e-13);
    EXPECT_EQ(m.interval_mass(0.3, 0.3), 0.0);
}

TEST(LevyModels, CgmyTailMatchesQuadrature) {
    const auto m = cgmy15();
    // Frozen exp_sinh value of ∫_{0.5}^∞ 0.007 e^{−4x} x^{−2.5} dx.
    EXPECT_NEAR(m.tail_integral(0.5) / 0.000662647669787376, 1.0, 1e-8);
    for (double x : {1e-4, 3e-3, 0.07, 0.9, 6.0, -1e-4, -0.02, -0.5, -4.0}) {
        const double o = oracle_tail(m, x);
        EXPECT_NEAR(m.tail_integral(x) / o, 1.0, 1e-8) << x;
    }
}

TEST(LevyModels, CgmyIntegerAndNearIntegerIndex) {
    for (double y : {1.0, 0.999, 1.001, 0.2, 0.4, 1.1}) {
        const auto m = LevyModel1D::cgmy({0.5, 3.0, 5.0, y});
        for (double x : {0.01, 0.6, 2.5, -0.01, -1.3}) {
            EXPECT_NEAR(m.tail_integral(x) / oracle_tail(m, x), 1.0, 1e-8) << y << " " << x;
        }
    }
}

TEST(LevyModels, TailVanishesAtInfinity) {
    for (const auto& m : {paper_hem(), cgmy15(), paper_vg()}) {
        EXPECT_LT(std::fabs(m.tail_integral(200.0)), 1e-60);
        EXPECT_LT(std::fabs(m.tail_integral(-200.0)), 1e-60);
    }
}

TEST(LevyModels, TailAtZeroIsDomainError) {
    EXPECT_THROW(cgmy15().tail_integral(0.0), std::domain_error);
    EXPECT_THROW(paper_hem().interval_mass(-0.1, 0.1), std::domain_error);
}

TEST(LevyModels, VgMatchesDirectDensity) {
    const auto m = paper_vg();
    const auto p = m.vg_params();
    for (double x : {0.003, 0.05, 0.4, -0.003, -0.05, -0.4}) {
        EXPECT_NEAR(m.density(x) / vg_density(p, x), 1.0, 1e-12) << x;
    }
    const double h = 0.01;
    const double o = oracle_segment([&](double t) { return t * t * vg_density(p, t); }, 0.0, h / 2) +
                     oracle_segment([&](double t) { return t * t * vg_density(p, -t); }, 0.0, h / 2);
    EXPECT_NEAR(m.truncated_second_moment(h) / o, 1.0, 1e-6);
}

TEST(LevyModels, HemSecondMomentBound) {
    const auto m = paper_hem();
    for (double h : {1e-4, 1e-2, 0.5}) {
        EXPECT_LE(m.truncated_second_moment(h), 3.0 * (h / 2) * (h / 2));
        EXPECT_GT(m.truncated_second_moment(h), 0.0);
    }
    const auto m0 = LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.0});
    EXPECT_EQ(m0.truncated_second_moment(0.01), m.truncated_second_moment(0.01));
}

TEST(LevyModels, CgmySecondMomentScaling) {
    const auto m = cgmy15();
    const double r = m.truncated_second_moment(1e-3) / m.truncated_second_moment(5e-4);
    EXPECT_NEAR(r / std::sqrt(2.0), 1.0, 0.05);
    EXPECT_NEAR(std::log2(r), 0.5, 0.05);
    double prev = 0.0;
    for (double h = 1e-5; h < 2.0; h *= 1.7) {
        const double v = m.truncated_second_moment(h);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(LevyModels, Additivity) {
    for (const auto& m : {paper_hem(), cgmy15(), paper_vg(), LevyModel1D::cgmy({1.23, 15, 20, 0.2})}) {
        for (auto [a, b, c] : {std::tuple{0.001, 0.0013, 0.9}, std::tuple{0.2, 0.21, 0.22},
                               std::tuple{1e-5, 0.3, 0.31}}) {
            const double lhs = m.interval_mass(a, b) + m.interval_mass(b, c);
            EXPECT_NEAR(lhs / m.interval_mass(a, c), 1.0, 1e-12);
            const double nl = m.interval_mass(-c, -b) + m.interval_mass(-b, -a);
            EXPECT_NEAR(nl / m.interval_mass(-c, -a), 1.0, 1e-12);
        }
    }
}

TEST(LevyModels, TailDecomposesAtFarPoint) {
    for (const auto& m : {paper_hem(), cgmy15(), paper_vg()}) {
        for (double x : {0.01, 0.3}) {
            const double xb = 50.0 / m.decay_rate(true);
            EXPECT_NEAR(m.tail_integral(x), m.interval_mass(x, xb) + m.tail_integral(xb),
                        1e-10 * std::fabs(m.tail_integral(x)));
            const double xn = -50.0 / m.decay_rate(false);
            EXPECT_NEAR(m.tail_integral(-x), -m.interval_mass(xn, -x) + m.tail_integral(xn),
                        1e-10 * std::fabs(m.tail_integral(-x)));
        }
    }
}

TEST(LevyModels, BgIndex) {
    EXPECT_EQ(bg_index(cgmy15()), 1.5);
    EXPECT_EQ(bg_index(paper_hem()), 0.0);
    EXPECT_EQ(bg_index(paper_vg()), 0.0);
    EXPECT_TRUE(paper_hem().finite_activity());
    EXPECT_FALSE(paper_vg().finite_activity());
    EXPECT_TRUE(paper_vg().finite_variation());
    EXPECT_FALSE(cgmy15().finite_variation());
}

TEST(LevyModels, HemTotalMass) {
    const auto m = paper_hem();
    EXPECT_NEAR(m.tail_at_zero(true) - m.tail_at_zero(false), 3.0, 1e-14);
}

TEST(LevyModels, TruncatedMeasure) {
    TruncatedMeasure1D t(cgmy15(), 1.0);
    EXPECT_EQ(t.interval_mass(1.5, 2.0), 0.0);
    EXPECT_EQ(t.tail_integral(1.2), 0.0);
    EXPECT_DOUBLE_EQ(t.interval_mass(0.2, 0.4), cgmy15().interval_mass(0.2, 0.4));
    EXPECT_DOUBLE_EQ(t.interval_mass(0.5, 3.0), cgmy15().interval_mass(0.5, 1.0));
    EXPECT_NEAR(t.tail_integral(0.5), cgmy15().interval_mass(0.5, 1.0), 1e-18);
}
