#include <cmath>

#include <gtest/gtest.h>

#include "levymlmc/payoffs.hpp"

using namespace levymlmc;

namespace {

LevyModel1D hem() { return LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.05}); }
LevyModel1D hem_pure() { return LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.0}); }

GridSpec grid(double h, double R, std::size_t d = 1) {
    GridSpec g;
    g.h = h;
    g.R = R;
    g.d = d;
    return g;
}

std::shared_ptr<const JumpTable> table(const JumpMeasure& m, const GridSpec& g) {
    return std::make_shared<const JumpTable>(build_jump_table(m, g));
}

}  // namespace

TEST(Euler, ConstantCoefficientIsExact) {
    const JumpMeasure m(LevyModel1D::cgmy({0.5, 4.0, 4.0, 1.2}));
    const auto p = make_process(make_triplet(m), table(m, grid(0.01, 1.0)), 1.0);
    Matrix A(1, 1);
    A << 0.37;
    const Vector z0 = Vector::Constant(1, 1.25);
    const auto sde = constant_sde(A, z0);
    PathRequest req;
    req.mode = PathMode::times;
    req.grid = euler_grid_fn(1.2, 1.0);
    const auto g = req.grid(p.h());
    PathWorkspace ws;
    PathSkeleton sk;
    EulerPath z;
    for (int i = 0; i < 300; ++i) {
        Rng rng = Rng::for_path(3, 0, i);
        simulate_path(p, req, rng, ws, sk, nullptr, &g);
        euler_path(sde, sk, z);
        const Vector direct = z0 + A * sk.endpoint;
        EXPECT_EQ(z.endpoint()(0), direct(0));
        euler_path(constant_sde(A, Vector::Zero(1)), sk, z);
        EXPECT_EQ(z.endpoint()(0) - (A * sk.endpoint)(0), 0.0);
    }
}

TEST(Euler, ZeroCoefficientIsConstant) {
    const JumpMeasure m(hem());
    const auto p = make_process(make_triplet(m), table(m, grid(0.02, 1.0)), 1.0);
    const auto sde = constant_sde(Matrix::Zero(2, 1), Vector::Constant(2, 4.0));
    PathRequest req;
    req.mode = PathMode::times;
    PathWorkspace ws;
    PathSkeleton sk;
    EulerPath z;
    Rng rng(4);
    simulate_path(p, req, rng, ws, sk);
    euler_path(sde, sk, z);
    for (double v : z.values) EXPECT_EQ(v, 4.0);
}

TEST(Euler, GeometricProductOracle) {
    // Finite activity, no diffusion, single-increment segments: Z_T = z0·∏(1 + ΔX).
    const JumpMeasure m(hem_pure());
    auto t = build_jump_table(m, grid(0.01, 1.0));
    t.C_h.setZero();
    t.c_h.setZero();
    const auto p = make_process(make_triplet(m), std::make_shared<const JumpTable>(t), 1.0, DriftMode::given);
    const auto sde = geometric_sde(2.0);
    PathRequest req;
    req.mode = PathMode::times;
    PathWorkspace ws;
    PathSkeleton sk;
    EulerPath z;
    const double drift = p.drift(0);
    for (int i = 0; i < 500; ++i) {
        Rng rng = Rng::for_path(8, 0, i);
        simulate_path(p, req, rng, ws, sk);
        euler_path(sde, sk, z);
        double prod = 2.0, t_prev = 0.0;
        for (std::size_t k = 0; k < sk.points(); ++k) {
            const double jump = sk.h * sk.jump(k)[0];
            prod *= 1.0 + drift * (sk.times[k] - t_prev) + jump;
            t_prev = sk.times[k];
        }
        EXPECT_NEAR(z.endpoint()(0), prod, 1e-12 * std::fabs(prod));
    }
}

TEST(Euler, BreakpointDensity) {
    const JumpMeasure m(LevyModel1D::cgmy({0.007, 2.0, 4.0, 1.5}));
    const auto p = make_process(make_triplet(m), table(m, grid(0.01, 2.0)), 1.0);
    PathRequest req;
    req.mode = PathMode::times;
    req.grid = euler_grid_fn(1.5, 1.0, 10.0);
    const auto g = req.grid(p.h());
    const double eps = 10.0 * std::pow(0.01, 1.5);
    PathWorkspace ws;
    PathSkeleton sk;
    EulerPath z;
    double steps = 0.0, jumps = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::for_path(1, 0, i);
        simulate_path(p, req, rng, ws, sk, nullptr, &g);
        euler_path(geometric_sde(1.0), sk, z);
        steps += static_cast<double>(z.steps());
        jumps += static_cast<double>(sk.n_jumps);
        for (std::size_t k = 1; k < z.steps(); ++k) ASSERT_LE(z.times[k] - z.times[k - 1], eps * (1 + 1e-12));
    }
    EXPECT_LE(steps / n, 2.0 * jumps / n + 1.0 / eps + 1.0);
}

TEST(Euler, RejectsCountsModeAndBadCap) {
    const JumpMeasure m(hem());
    const auto p = make_process(make_triplet(m), table(m, grid(0.02, 1.0)), 1.0);
    PathRequest req;
    PathWorkspace ws;
    PathSkeleton sk;
    EulerPath z;
    Rng rng(1);
    simulate_path(p, req, rng, ws, sk);
    EXPECT_THROW(euler_path(geometric_sde(1.0), sk, z), ConfigError);
    EXPECT_THROW(euler_grid(0.01, 1.0, 1.0, 0.0), ConfigError);
}

TEST(CoupledEuler, ConstantCoefficientDifference) {
    const JumpMeasure m(LevyModel1D::cgmy({0.007, 2.0, 4.0, 1.5}));
    const auto tri = make_triplet(m);
    const auto pf = make_process(tri, table(m, grid(0.01, 2.0)), 1.0);
    const auto pc = make_process(tri, table(m, grid(0.02, 2.0)), 1.0);
    const auto mt = build_mark_table(*pf.table, m);
    Matrix A(1, 1);
    A << 2.0;
    const auto sde = constant_sde(A, Vector::Zero(1));
    PathRequest req;
    req.mode = PathMode::times;
    req.grid = euler_grid_fn(1.5, 1.0);
    const auto gf = req.grid(0.01), gc = req.grid(0.02);
    PathWorkspace ws;
    CoupledPathPair pair;
    CoupledEulerPair z;
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::for_path(6, 1, i);
        simulate_coupled_paths(pf, pc, mt, req, rng, ws, pair, nullptr, &gf, &gc);
        coupled_euler(sde, pair, z);
        EXPECT_EQ(z.fine.endpoint()(0) - z.coarse.endpoint()(0),
                  2.0 * (pair.fine.endpoint(0) - pair.coarse.endpoint(0)));
    }
}

TEST(CoupledEuler, EvenLatticeMeasureGivesIdenticalPaths) {
    // A fine table supported on 2hZ with the coarse compensators: both legs coincide.
    const JumpMeasure m(hem_pure());
    const auto coarse = build_jump_table(m, grid(0.02, 1.0));
    JumpTable fine = coarse;
    fine.h = 0.01;
    fine.n_R = 2 * coarse.n_R;
    for (auto& k : fine.states) k *= 2;
    const auto tri = make_triplet(m);
    const auto pf = make_process(tri, std::make_shared<const JumpTable>(fine), 1.0);
    const auto pc = make_process(tri, std::make_shared<const JumpTable>(coarse), 1.0);
    const auto mt = build_mark_table(fine, m);
    const auto sde = geometric_sde(1.0);
    PathRequest req;
    req.mode = PathMode::times;
    PathWorkspace ws;
    CoupledPathPair pair;
    CoupledEulerPair z;
    for (int i = 0; i < 300; ++i) {
        Rng rng = Rng::for_path(2, 1, i);
        simulate_coupled_paths(pf, pc, mt, req, rng, ws, pair);
        coupled_euler(sde, pair, z);
        ASSERT_EQ(z.fine.times, z.coarse.times);
        for (std::size_t k = 0; k < z.fine.values.size(); ++k)
            ASSERT_NEAR(z.fine.values[k], z.coarse.values[k], 1e-14);
    }
}

TEST(Fmm, LastRateHasNoDrift) {
    const auto sw = swaption_example();
    Matrix Q(2, 2);
    Q << 0.3, 0.05, 0.05, 0.2;
    const Vector d = fmm_drift(sw.fmm, 1.0, sw.fmm.R0, Q);
    EXPECT_EQ(d(4), 0.0);
    for (int i = 0; i < 4; ++i) EXPECT_LT(d(i), 0.0);
    FMMSpec flat = sw.fmm;
    flat.sigma.setZero();
    EXPECT_EQ(fmm_drift(flat, 1.0, flat.R0, Q).norm(), 0.0);
}

TEST(Fmm, DriftMatchesLatticeSum) {
    // Two rates, brute force: −w_2 Σ_s mass(s)(γ¹·z)(γ²·z) − w_2 γ¹ C_h γ²ᵀ.
    const JumpMeasure m(CopulaMeasure(ClaytonCopula(0.7, 0.3, 2), {hem(), hem()}));
    const auto t = build_jump_table(m, grid(0.1, 1.0, 2));
    FMMSpec spec;
    spec.tenor = {1.0, 1.5, 2.5};
    spec.R0 = Vector::Constant(2, 0.03);
    spec.sigma.resize(2, 2);
    spec.sigma << 0.4, 1.1, 0.9, 0.3;
    Vector R(2);
    R << 0.025, 0.041;
    const double tt = 1.2;
    const double g1 = 1.0, g2 = 1.0;  // before the second period starts
    const double w2 = 1.0 * R(1) / (1.0 + 1.0 * R(1));
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double z0 = t.coord(i, 0), z1 = t.coord(i, 1);
        s += t.mass[i] * (g1 * 0.4 * z0 + g1 * 1.1 * z1) * (g2 * 0.9 * z0 + g2 * 0.3 * z1);
    }
    // γ¹ at t = 1.2 is scaled by g_1 = (1.5 − 1.2)/0.5.
    const double g1t = 0.6;
    s *= g1t;
    Eigen::RowVector2d a(0.4 * g1t, 1.1 * g1t), b(0.9, 0.3);
    s += a * t.C_h * b.transpose();
    const Vector fast = fmm_drift(spec, tt, R, fmm_second_moment(t));
    const Vector slow = fmm_drift(spec, tt, R, t);
    EXPECT_NEAR(fast(0), -w2 * s, 1e-12 * std::fabs(s));
    EXPECT_NEAR(slow(0), -w2 * s, 1e-12 * std::fabs(s));
    EXPECT_EQ(fast(1), 0.0);
}

TEST(Fmm, GammaProfile) {
    const auto sw = swaption_example();
    EXPECT_EQ(sw.fmm.g(0, 4.0), 1.0);
    EXPECT_EQ(sw.fmm.g(0, 5.5), 0.5);
    EXPECT_EQ(sw.fmm.g(0, 6.0), 0.0);
    EXPECT_EQ(sw.fmm.g(4, 9.0), 1.0);
    FMMSpec bad;
    bad.tenor = {1.0, 1.0};
    bad.R0 = Vector::Constant(1, 0.01);
    bad.sigma = Matrix::Ones(1, 1);
    EXPECT_THROW(bad.validate(), ConfigError);
}
