// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "experiments.hpp"
#include "levymlmc/levymlmc.hpp"

using namespace levymlmc;

namespace {

// Pinned tolerances.
constexpr double kIdentityTol = 1e-10;
constexpr double kChiSquareLevel = 0.01;
constexpr double kMeanSE = 4.0;
constexpr double kVarSE = 5.0;
constexpr double kRateTol = 0.35;
constexpr double kCombinedSE = 3.0;
constexpr double kSdeRateTol = 0.5;
constexpr double kBoxTol = 1e-12;
constexpr double kPoissonSE = 4.0;

constexpr std::uint64_t kSeed = 20240601;
const unsigned kThreads = default_threads();

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

LevyModel1D hem() { return LevyModel1D::hem({3.0, 0.6, 20.0, 25.0, 0.05}); }
LevyModel1D hem_lambda(double lambda) { return LevyModel1D::hem({lambda, 0.6, 20.0, 25.0, 0.05}); }
LevyModel1D cgmy15() { return LevyModel1D::cgmy({0.007, 2.0, 4.0, 1.5}); }

GridSpec grid(double h, double R, std::size_t d = 1) {
    GridSpec g;
    g.h = h;
    g.R = R;
    g.d = d;
    return g;
}

std::shared_ptr<const JumpTable> table(const JumpMeasure& m, double h, double R) {
    return std::make_shared<const JumpTable>(build_jump_table(m, grid(h, R, m.dim())));
}

// ----------------------------------------------------------------------------

Outcome rate_identity() {
    std::string detail;
    bool pass = true;
    const std::vector<std::pair<std::string, JumpMeasure>> cases = {
        {"1D HEM h=0.05", JumpMeasure(hem())},
        {"2D Clayton HEM h=0.25", JumpMeasure(CopulaMeasure(ClaytonCopula(0.7, 0.3, 2), {hem(), hem()}))},
    };
    const double hs[] = {0.05, 0.25};
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& m = cases[c].second;
        const auto fine = table(m, hs[c], 1.0), coarse = table(m, 2 * hs[c], 1.0);
        const auto rep = verify_rate_identity(*fine, *coarse, m, kIdentityTol);
        const bool ok = rep.max_rel_error <= kIdentityTol && !rep.cells.empty();
        pass = pass && ok;
        detail += fmt("%s%s: %zu cells, max rel err %.2e", c ? "; " : "", cases[c].first.c_str(), rep.cells.size(),
                      rep.max_rel_error);
    }
    return {pass, detail};
}

Outcome coupled_marginal() {
    const JumpMeasure m(hem());
    const double h = 0.05;
    const auto fine = table(m, h, 1.0), coarse = table(m, 2 * h, 1.0);
    const MarkTable mt = build_mark_table(*fine, m);
    const std::uint64_t N = 1'000'000;
    std::vector<std::uint64_t> count(coarse->size() + 1, 0);  // last bin: pruned
    double max_disp = 0.0;
    Rng rng = Rng::for_path(kSeed, 0, 0);
    for (std::uint64_t n = 0; n < N; ++n) {
        const std::size_t i = fine->sampler(rng);
        const auto cj = sample_coupled_jump(mt, i, rng);
        const std::int32_t k = fine->state(i)[0];
        const std::int32_t mk = mt.mark(cj.entry)[0];
        const double fine_jump = k * h;
        double coarse_jump = 0.0;
        if (cj.pruned) {
            ++count.back();
        } else {
            const std::int32_t z = (k + mk) / 2;
            const auto c = coarse->find(&z);
            if (!c) return {false, fmt("coarse jump %d outside the coarse table", z)};
            ++count[*c];
            coarse_jump = z * 2 * h;
        }
        max_disp = std::max(max_disp, std::fabs(fine_jump - coarse_jump));
    }
    std::vector<double> expected(count.size());
    for (std::size_t c = 0; c < coarse->size(); ++c) expected[c] = N * coarse->mass[c] / fine->total_rate;
    expected.back() = N * (1.0 - coarse->total_rate / fine->total_rate);
    // Pool bins with small expectations.
    double stat = 0.0, pool_e = 0.0, pool_o = 0.0;
    int bins = 0;
    for (std::size_t c = 0; c < count.size(); ++c) {
        if (expected[c] < 5.0) {
            pool_e += expected[c];
            pool_o += count[c];
            continue;
        }
        stat += std::pow(count[c] - expected[c], 2) / expected[c];
        ++bins;
    }
    if (pool_e > 0.0) {
        stat += std::pow(pool_o - pool_e, 2) / pool_e;
        ++bins;
    }
    const boost::math::chi_squared dist(bins - 1);
    const double p = boost::math::cdf(boost::math::complement(dist, stat));
    const bool disp_ok = max_disp <= h * (1.0 + 1e-12);
    return {p >= kChiSquareLevel && disp_ok && fine->size() <= 200,
            fmt("%zu fine states, %d bins, chi2=%.2f, p=%.3f, max |J|=%.4g (h=%.4g)", fine->size(), bins, stat, p,
                max_disp, h)};
}

Outcome scheme_moments() {
    const JumpMeasure m(cgmy15());
    const auto t = table(m, 0.01, 2.0);
    const double T = 1.0;
    const auto proc = make_process(make_triplet(m), t, T, DriftMode::given);
    const std::uint64_t n = 100'000;
    PathRequest req;
    const Matrix X = sample_matrix(req, {[](const PathSkeleton& s) { return s.endpoint(0); }}, proc, n, kSeed,
                                   kThreads);
    const Vector x = X.col(0);
    const double mean = x.mean();
    const Eigen::ArrayXd c = x.array() - mean;
    const double var = c.square().sum() / (n - 1);
    const double m4 = c.pow(4).mean();
    const double se_mean = std::sqrt(var / n);
    const double se_var = std::sqrt((m4 - var * var) / n);
    const double mu_exp = (proc.mu(0) + t->mu_tilde(0)) * T;
    double jump2 = 0.0;
    for (std::size_t i = 0; i < t->size(); ++i) jump2 += t->coord(i, 0) * t->coord(i, 0) * t->mass[i];
    const double var_exp = T * (0.0 + t->C_h(0, 0) + jump2);
    const double zm = std::fabs(mean - mu_exp) / se_mean, zv = std::fabs(var - var_exp) / se_var;
    return {zm <= kMeanSE && zv <= kVarSE,
            fmt("mean %.6g vs %.6g (%.2f SE), variance %.6g vs %.6g (%.2f SE)", mean, mu_exp, zm, var, var_exp, zv)};
}

LevelProblem put_problem() {
    const JumpMeasure m(cgmy15());
    LevelProblem p{make_triplet(m)};
    p.drift = DriftMode::exponential;
    p.T = 1.0;
    p.h0 = 0.01;
    p.grid = grid(0.01, 2.0);
    p.payoff = put_payoff(100.0, Market{100.0, 0.02, 1.0});
    return p;
}

Outcome level_rates() {
    LevelEngine eng(put_problem(), kSeed, kThreads);
    const auto t = level_diagnostics(eng, 5, 1'000'000);
    const double beta = eng.beta();
    const double tv = -(2.0 - beta), tm = -(1.0 - beta / 2.0);
    const bool ok = std::fabs(t.var_slope.slope - tv) <= kRateTol && std::fabs(t.mean_slope.slope - tm) <= kRateTol;
    return {ok, fmt("var slope %.3f (target %.2f), mean slope %.3f (target %.2f), beta %.2f", t.var_slope.slope, tv,
                    t.mean_slope.slope, tm, beta)};
}

Outcome mlmc_vs_mc() {
    LevelEngine eng(put_problem(), kSeed, kThreads);
    MLMCConfig cfg;
    cfg.eps = 0.05;
    const MLMCReport r = run_mlmc(eng, cfg);
    const MCResult mc = mc_estimate(eng.problem().payoff, eng.process(r.L), 100'000, kSeed + 1, kThreads, 1000);
    const double se = std::sqrt(r.stat_error * r.stat_error + mc.stderr_ * mc.stderr_);
    const double z = std::fabs(r.estimate - mc.estimate) / se;
    const bool ok = z <= kCombinedSE && r.total_cost < r.mc_proxy_cost;
    return {ok, fmt("MLMC %.5f (L=%d, stat %.4f) vs MC at level %d %.5f +- %.4f: %.2f SE; cost %.3g vs MC proxy %.3g "
                    "(literal eps^-2 V0 C_L: %.3g)",
                    r.estimate, r.L, r.stat_error, r.L, mc.estimate, mc.stderr_, z, r.total_cost, r.mc_proxy_cost,
                    r.mc_proxy_cost * cfg.theta_stat)};
}

Outcome credit() {
    // Single-name CDS.
    const double rec = 0.4, T = 0.5, r = 0.02, h = 1e-4;
    const std::uint64_t n = 100'000;
    const LevyModel1D mh = hem();
    const JumpMeasure m(mh);
    const auto t = table(m, h, 1.0);
    const auto proc = make_process(make_triplet(m), t, T, DriftMode::given);
    const double spread_in = 100e-4;
    const double a = threshold_for_intensity(mh, spread_in / (1.0 - rec));
    const std::vector<DefaultThreshold> th = {snap_threshold(a, h)};
    PathRequest req;
    req.mode = PathMode::times;
    const Matrix tau =
        sample_matrix(req, {[th](const PathSkeleton& s) { return first_default_time(s, th); }}, proc, n, kSeed, kThreads);
    Vector dl(n), ann(n), surv(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::tie(dl(i), ann(i)) = cds_path_legs(tau(i, 0), T, r, rec);
        surv(i) = tau(i, 0) > T;
    }
    const SpreadEstimate e = spread_from_legs(dl, ann, surv);
    const bool cds_ok = e.lo99 <= spread_in && spread_in <= e.hi99;
    const double lattice = fair_spread(lattice_default_intensity(*t, th), rec);

    // Two-name first-to-default survival.
    const CopulaMeasure cm(ClaytonCopula(0.7, 0.3, 2), {hem_lambda(5.0), hem_lambda(10.0)});
    const JumpMeasure m2(cm);
    const double h2 = 0.02, a2 = -0.21, t2 = 0.5;
    const auto t2tab = table(m2, h2, 1.0);
    const auto proc2 = make_process(make_triplet(m2), t2tab, t2, DriftMode::given);
    const std::vector<DefaultThreshold> th2 = {snap_threshold(a2, h2), snap_threshold(a2, h2)};
    const Matrix tau2 = sample_matrix(req, {[th2](const PathSkeleton& s) { return first_default_time(s, th2); }},
                                      proc2, n, kSeed + 1, kThreads);
    const double s_mc = (tau2.col(0).array() > t2).cast<double>().mean();
    const double s_se = std::sqrt(s_mc * (1.0 - s_mc) / n);
    const double s_cf = ftd_survival_closed(cm, th2[0].snapped(), th2[1].snapped(), t2);
    const bool ftd_ok = std::fabs(s_mc - s_cf) <= kZ99 * s_se;
    return {cds_ok && ftd_ok,
            fmt("CDS input %.2f bps, MC %.2f [%.2f, %.2f] (lattice %.3f); FtD survival MC %.5f +- %.5f vs closed %.5f",
                spread_in * 1e4, e.spread * 1e4, e.lo99 * 1e4, e.hi99 * 1e4, lattice * 1e4, s_mc, s_se, s_cf)};
}

Outcome sde_rate() {
    const JumpMeasure m(cgmy15());
    LevelProblem p{make_triplet(m)};
    p.drift = DriftMode::martingale;
    p.T = 1.0;
    p.h0 = 0.1;
    p.grid = grid(0.1, 2.0);
    p.payoff = sde_endpoint_payoff(geometric_sde(1.0), m.bg_index(), 1.0);
    LevelEngine eng(std::move(p), kSeed, kThreads);
    std::vector<double> lv, ly;
    std::string vals;
    for (int l = 1; l <= 4; ++l) {
        const LevelStats s = eng.sample(l, 0, 20'000);
        lv.push_back(l);
        ly.push_back(std::log2(s.var_y()));
        vals += fmt("%s%.2f", l > 1 ? "," : "", ly.back());
    }
    const Slope sl = regression_slope(lv, ly);
    const double target = -(2.0 - eng.beta());
    const bool rate_ok = std::fabs(sl.slope - target) <= kSdeRateTol;

    // FMM preset end to end.
    const ConfigFile c = ConfigFile::load(std::string(LEVYMLMC_CONFIG_DIR) + "/fmm-swaption.ini");
    const JumpMeasure dm = measure_from_config(c);
    const SwaptionSpec sw = cli::swaption_from_config(c, dm);
    const auto ft = table(dm, c.get<double>("grid.h"), c.get<double>("grid.R"));
    const auto fp = make_process(make_triplet(dm), ft, sw.fmm.tenor.front(), DriftMode::martingale);
    const MCResult r = mc_estimate(swaption_payoff(sw), fp, c.get<std::uint64_t>("fmm.paths"), kSeed, kThreads);
    const bool fmm_ok = std::isfinite(r.estimate) && std::isfinite(r.stderr_) && r.stderr_ > 0.0;
    return {rate_ok && fmm_ok, fmt("log2 V levels 1..4 = %s, slope %.3f (target %.2f); swaption %.6f +- %.2e",
                                   vals.c_str(), sl.slope, target, r.estimate, r.stderr_)};
}

Outcome properties() {
    std::vector<std::string> fails;
    std::string box_detail;
    // Mark pmfs.
    {
        const std::vector<std::pair<JumpMeasure, double>> grids = {
            {JumpMeasure(hem()), 0.05},
            {JumpMeasure(cgmy15()), 0.02},
            {JumpMeasure(CopulaMeasure(ClaytonCopula(0.7, 0.3, 2), {hem(), cgmy15()})), 0.1},
        };
        std::size_t states = 0;
        for (const auto& [m, h] : grids) {
            const auto t = table(m, h, 1.0);
            const MarkTable mt = build_mark_table(*t, m);
            for (std::size_t i = 0; i < t->size(); ++i, ++states) {
                double prev = 0.0;
                for (std::size_t e = mt.offset[i]; e < mt.offset[i + 1]; ++e) {
                    if (mt.prob(e, i) < 0.0) fails.push_back("negative mark probability");
                    prev = mt.cdf[e];
                }
                if (prev != 1.0) fails.push_back(fmt("mark pmf of state %zu sums to %.17g", i, prev));
            }
        }
        if (fails.empty() && states == 0) fails.push_back("no mark states checked");
    }
    // Box additivity.
    {
        const CopulaMeasure cm(ClaytonCopula(0.7, 0.3, 3), {hem(), LevyModel1D::vg({0.1, 0.06, 0.1}), cgmy15()});
        std::mt19937_64 g(kSeed);
        std::uniform_real_distribution<double> U(0.02, 1.0), S(0.1, 0.9);
        double worst = 0.0, worst_rel = 0.0;
        for (int trial = 0; trial < 400; ++trial) {
            std::vector<Interval> box(3);
            for (auto& iv : box) {
                double a = U(g), b = U(g);
                if (a > b) std::swap(a, b);
                if (g() & 1) iv = {-b, -a};
                else iv = {a, b};
            }
            const double whole = cm.rectangle_mass(box);
            const std::size_t axis = trial % 3;
            const double cut = box[axis].lo + S(g) * (box[axis].hi - box[axis].lo);
            auto lo = box, hi = box;
            lo[axis].hi = cut;
            hi[axis].lo = cut;
            const double err = std::fabs(cm.rectangle_mass(lo) + cm.rectangle_mass(hi) - whole);
            worst = std::max(worst, err);
            if (whole > 1e-8) worst_rel = std::max(worst_rel, err / whole);
        }
        // Masses are rates; additivity is checked in absolute terms.
        if (!(worst <= kBoxTol)) fails.push_back(fmt("box additivity error %.2e", worst));
        box_detail = fmt("box additivity %.1e abs, %.1e rel", worst, worst_rel);
    }
    // Constant-coefficient Euler, bit for bit.
    {
        const JumpMeasure m(CopulaMeasure(ClaytonCopula(0.7, 0.3, 2), {hem(), cgmy15()}));
        const auto t = table(m, 0.05, 1.0);
        const auto proc = make_process(make_triplet(m), t, 1.0, DriftMode::martingale);
        Matrix A(2, 2);
        A << 1.3, -0.7, 0.25, 2.1;
        const SDESpec sde = constant_sde(A, Vector::Zero(2));
        PathRequest req;
        req.mode = PathMode::times;
        req.grid = euler_grid_fn(m.bg_index(), 1.0);
        const auto gt = req.grid(t->h);
        PathWorkspace ws;
        PathSkeleton sk;
        EulerPath z;
        int bad = 0;
        for (std::uint64_t i = 0; i < 2000; ++i) {
            Rng rng = Rng::for_path(kSeed, 0, i);
            simulate_path(proc, req, rng, ws, sk, nullptr, &gt);
            euler_path(sde, sk, z);
            const Vector x = Eigen::Map<const Vector>(sk.value(sk.points() - 1), 2);
            const Vector direct = A * x;
            if (std::memcmp(direct.data(), z.endpoint().data(), 2 * sizeof(double)) != 0) ++bad;
        }
        if (bad) fails.push_back(fmt("constant-coefficient Euler differs on %d paths", bad));
    }
    // Poisson sampler moments.
    {
        for (double lam : {0.5, 3.0, 9.99, 10.0, 57.0, 1e4}) {
            const std::uint64_t n = 400'000;
            Rng rng = Rng::for_path(kSeed, 7, static_cast<std::uint64_t>(lam * 100));
            CompensatedSum s1, s2;
            std::vector<double> v(n);
            for (auto& x : v) x = static_cast<double>(sample_poisson(lam, rng));
            for (double x : v) s1.add(x);
            const double mean = s1.value() / n;
            for (double x : v) s2.add((x - mean) * (x - mean));
            const double var = s2.value() / (n - 1);
            const double zm = std::fabs(mean - lam) / std::sqrt(lam / n);
            const double zv = std::fabs(var - lam) / std::sqrt((lam + 2 * lam * lam) / n);
            if (zm > kPoissonSE || zv > kPoissonSE)
                fails.push_back(fmt("Poisson(%g): mean %.2f SE, variance %.2f SE", lam, zm, zv));
        }
    }
    // Deterministic reruns.
    {
        auto run = [](unsigned threads) {
            LevelProblem p = put_problem();
            p.grid = grid(0.01, 1.0);
            LevelEngine eng(std::move(p), kSeed, threads);
            MLMCConfig cfg;
            cfg.eps = 0.2;
            cfg.pilot_paths = 2000;
            cfg.max_levels = 3;
            const MLMCReport r = run_mlmc(eng, cfg);
            const MCResult mc = mc_estimate(eng.problem().payoff, eng.process(1), 20'000, kSeed, threads);
            std::vector<double> out = {r.estimate, r.stat_error, r.bias, r.total_cost, mc.estimate, mc.variance};
            for (const auto& l : r.levels) out.insert(out.end(), {l.mean, l.var, static_cast<double>(l.n)});
            return out;
        };
        const auto a = run(1), b = run(1), c = run(4);
        if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
            fails.push_back("rerun with the same seed differs");
        if (a.size() != c.size() || std::memcmp(a.data(), c.data(), a.size() * sizeof(double)) != 0)
            fails.push_back("results depend on the thread count");
    }
    std::string detail = "mark pmfs exact, " + box_detail + ", constant Euler bit-exact, Poisson moments, reruns identical";
    if (!fails.empty()) {
        detail = fails.front();
        for (std::size_t i = 1; i < fails.size() && i < 4; ++i) detail += "; " + fails[i];
    }
    return {fails.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"coupling rate identity", rate_identity},
        {"coupled marginal law", coupled_marginal},
        {"scheme moments", scheme_moments},
        {"level decay rates", level_rates},
        {"MLMC vs MC", mlmc_vs_mc},
        {"credit closed forms", credit},
        {"SDE coupled Euler rate and FMM", sde_rate},
        {"property suite", properties},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu %s: %s: %s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed ? 1 : 0;
}
