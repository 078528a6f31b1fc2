#pragma once

// Path functionals and closed-form benchmarks: equity options, lattice default
// clocks with CDS/FtD legs, the swaption on the Lévy forward market model, and
// least-squares control variates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "levymlmc/sde_euler.hpp"

namespace levymlmc {

class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Values of the driver at the requested observation dates, in order.
inline std::vector<const double*> observed_values(const PathSkeleton& s, std::size_t expected) {
    std::vector<const double*> out;
    if (s.mode == PathMode::times) {
        for (std::size_t i = 0; i < s.points(); ++i)
            if (s.flags[i] & point_flag::observation) out.push_back(s.value(i));
    } else if (expected <= 1) {
        out.push_back(s.endpoint.data());
    }
    if (out.size() != expected)
        throw EvaluationError("payoff needs " + std::to_string(expected) + " observation dates, the path has " +
                              std::to_string(out.size()));
    return out;
}

// ----------------------------------------------------------------------------
// Equity payoffs on S_t = S0·exp(r t + X_t), with X in exponential drift mode.

struct Market {
    double S0 = 100.0;
    double r = 0.0;
    double T = 1.0;
};

inline Payoff put_payoff(double K, Market mk) {
    if (!(K > 0.0) || !(mk.S0 > 0.0)) throw ConfigError("put: strike and spot must be positive");
    Payoff p;
    p.name = "put";
    p.request.mode = PathMode::counts;
    const double df = std::exp(-mk.r * mk.T), fwd = mk.S0 * std::exp(mk.r * mk.T);
    p.eval = [=](const PathSkeleton& s) { return df * std::max(K - fwd * std::exp(s.endpoint(0)), 0.0); };
    p.lipschitz = df * K;  // in X_T
    return p;
}

/// (K − max_i S^i_T/S^i_0)_+, discounted.
inline Payoff best_of_put_payoff(double K, std::size_t d, Market mk) {
    Payoff p;
    p.name = "best_of_put";
    p.request.mode = PathMode::counts;
    const double df = std::exp(-mk.r * mk.T), g = std::exp(mk.r * mk.T);
    p.eval = [=](const PathSkeleton& s) {
        if (s.d != d) throw EvaluationError("best-of put: dimension mismatch");
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d; ++j) best = std::max(best, s.endpoint(j));
        return df * std::max(K - g * std::exp(best), 0.0);
    };
    p.lipschitz = df * K;
    return p;
}

/// Arithmetic-average call over n_obs equally spaced dates.
inline Payoff asian_call_payoff(double K, std::size_t n_obs, Market mk) {
    if (n_obs == 0) throw ConfigError("asian: need at least one observation");
    Payoff p;
    p.name = "asian_call";
    p.request.mode = PathMode::times;
    std::vector<double> obs(n_obs);
    for (std::size_t k = 0; k < n_obs; ++k) obs[k] = mk.T * static_cast<double>(k + 1) / static_cast<double>(n_obs);
    p.request.observations = obs;
    const double df = std::exp(-mk.r * mk.T);
    p.eval = [=](const PathSkeleton& s) {
        const auto v = observed_values(s, n_obs);
        double avg = 0.0;
        for (std::size_t k = 0; k < n_obs; ++k) avg += mk.S0 * std::exp(mk.r * obs[k] + v[k][0]);
        avg /= static_cast<double>(n_obs);
        return df * std::max(avg - K, 0.0);
    };
    p.lipschitz = df;  // in the sup norm of the price path S
    return p;
}

// ----------------------------------------------------------------------------
// Credit: default at the first jump whose log-return is at most a.

/// Lattice threshold: jumps in cells k ≤ edge default; a' = (edge + ½)h.
struct DefaultThreshold {
    double a = 0.0;
    double h = 0.0;
    std::int64_t edge = 0;

    double snapped() const { return (static_cast<double>(edge) + 0.5) * h; }
};

inline DefaultThreshold snap_threshold(double a, double h) {
    if (!(a < 0.0)) throw std::domain_error("default threshold must be negative");
    const auto e = static_cast<std::int64_t>(std::llround(a / h - 0.5));
    if (e >= 0) throw std::domain_error("default threshold falls in the central cell");
    return {a, h, e};
}

/// Intensity Λ(a) = λ((−∞, a]).
inline double default_intensity(const LevyModel1D& m, double a) {
    if (!(a < 0.0)) throw std::domain_error("default_intensity: a must be negative");
    if (std::isinf(a)) return 0.0;
    return -m.tail_integral(a);
}

inline double survival_probability_closed(const LevyModel1D& m, double a, double t) {
    if (t < 0.0) throw std::domain_error("survival: t must be nonnegative");
    return std::exp(-default_intensity(m, a) * t);
}

struct CDSLegs {
    double DL = 0.0;
    double FL = 0.0;
    double PV = 0.0;
    double annuity = 0.0;  // ∫_0^T e^{−rs} P(τ > s) ds
};

/// Legs under a flat intensity Λ: survival e^{−Λs}.
inline CDSLegs cds_legs_closed(double intensity, double T, double r, double recovery, double spread) {
    if (intensity < 0.0 || T < 0.0) throw std::domain_error("cds: negative intensity or maturity");
    const double k = r + intensity;
    const double ann = k == 0.0 ? T : -std::expm1(-k * T) / k;
    CDSLegs l;
    l.annuity = ann;
    l.DL = (1.0 - recovery) * intensity * ann;
    l.FL = spread * ann;
    l.PV = l.DL - l.FL;
    return l;
}

inline double fair_spread(double intensity, double recovery) { return (1.0 - recovery) * intensity; }

/// Spread m with pricer(m) = target, by TOMS 748 on a bracket with a sign change.
inline double implied_spread(double pv_target, const std::function<double(double)>& pricer, double lo = 0.0,
                             double hi = 1.0) {
    auto f = [&](double m) { return pricer(m) - pv_target; };
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw SolverError("implied spread: no sign change on the bracket");
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(52), iters);
    double m = 0.5 * (r.first + r.second);
    if (std::fabs(f(m)) > 1e-10) {
        m = std::fabs(f(r.first)) < std::fabs(f(r.second)) ? r.first : r.second;
        if (std::fabs(f(m)) > 1e-10) throw SolverError("implied spread: tolerance not reached");
    }
    return m;
}

/// Threshold a < 0 whose intensity is Λ (Λ must lie below the left tail at 0−).
inline double threshold_for_intensity(const LevyModel1D& m, double intensity, double a_min = -50.0) {
    if (!(intensity > 0.0)) throw std::domain_error("threshold: intensity must be positive");
    const double top = -m.tail_at_zero(false);
    if (!(intensity < top)) throw SolverError("threshold: intensity exceeds the total downward jump rate");
    auto f = [&](double a) { return std::log(default_intensity(m, a)) - std::log(intensity); };
    double hi = -1e-12, lo = -1e-3;
    while (f(lo) > 0.0) {
        hi = lo;
        lo *= 2.0;
        if (lo < a_min) throw SolverError("threshold: intensity below the tail at a_min");
    }
    std::uintmax_t iters = 300;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

/// First-to-default intensity Λ1 + Λ2 − ρ(−Λ1, −Λ2) for two names under a Lévy copula.
inline double ftd_intensity(const CopulaMeasure& cm, double a1, double a2) {
    if (cm.dim() != 2) throw ConfigError("ftd closed form needs exactly two names");
    const double L1 = default_intensity(cm.margin(0), a1), L2 = default_intensity(cm.margin(1), a2);
    if (L1 == 0.0 || L2 == 0.0) return L1 + L2;
    const double u[2] = {-L1, -L2};
    return L1 + L2 - cm.copula()(u);
}

inline double ftd_survival_closed(const CopulaMeasure& cm, double a1, double a2, double t) {
    return std::exp(-t * ftd_intensity(cm, a1, a2));
}

/// Intensity of the lattice default clock: table mass of the cells with some k_j ≤ edge_j.
inline double lattice_default_intensity(const JumpTable& t, std::span<const DefaultThreshold> th) {
    if (th.size() != t.d) throw std::invalid_argument("one default threshold per name required");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::int32_t* k = t.state(i);
        for (std::size_t j = 0; j < th.size(); ++j)
            if (k[j] <= th[j].edge) {
                s += t.mass[i];
                break;
            }
    }
    return s;
}

/// First default time over the listed names, or +∞. Needs a times-mode skeleton.
inline double first_default_time(const PathSkeleton& s, std::span<const DefaultThreshold> th) {
    if (s.mode != PathMode::times) throw EvaluationError("default clock needs jump times");
    if (th.size() != s.d) throw EvaluationError("one default threshold per name required");
    for (std::size_t i = 0; i < s.points(); ++i) {
        if (!(s.flags[i] & point_flag::jump)) continue;
        const std::int32_t* k = s.jump(i);
        for (std::size_t j = 0; j < th.size(); ++j)
            if (k[j] <= th[j].edge) return s.times[i];
    }
    return std::numeric_limits<double>::infinity();
}

/// Per-path default leg (1−R)e^{−rτ}1{τ≤T} and risky annuity ∫_0^{τ∧T} e^{−rs} ds.
inline std::pair<double, double> cds_path_legs(double tau, double T, double r, double recovery) {
    const double stop = std::min(tau, T);
    const double ann = r == 0.0 ? stop : -std::expm1(-r * stop) / r;
    const double dl = tau <= T ? (1.0 - recovery) * std::exp(-r * tau) : 0.0;
    return {dl, ann};
}

// ----------------------------------------------------------------------------
// Per-path sample matrices and control variates.

/// One row per path, one column per functional, in path order for any thread count.
inline Matrix sample_matrix(const PathRequest& req, const std::vector<std::function<double(const PathSkeleton&)>>& fns,
                            const SchemeProcess& proc, std::uint64_t n, std::uint64_t seed, unsigned threads = 1,
                            OpCounter* ops = nullptr) {
    std::vector<double> grid;
    if (req.grid) grid = req.grid(proc.h());
    struct Block {
        std::vector<double> v;
        OpCounter ops;
    };
    const std::size_t k = fns.size();
    auto blocks = run_blocks<Block>(0, n, threads, [&](std::uint64_t b, std::uint64_t e) {
        Block out;
        out.v.reserve((e - b) * k);
        PathWorkspace ws;
        PathSkeleton sk;
        for (std::uint64_t i = b; i < e; ++i) {
            Rng rng = Rng::for_path(seed, 0, i);
            simulate_path(proc, req, rng, ws, sk, &out.ops, req.grid ? &grid : nullptr);
            for (const auto& f : fns) out.v.push_back(f(sk));
        }
        return out;
    });
    Matrix M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    std::uint64_t row = 0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.v.size() / k; ++i, ++row)
            for (std::size_t c = 0; c < k; ++c) M(row, c) = b.v[i * k + c];
        if (ops) *ops += b.ops;
    }
    return M;
}

struct ControlVariateFit {
    Vector coef;       // c in y − c·(x − E x)
    double estimate = 0.0;
    double stderr_ = 0.0;
    double raw_variance = 0.0;
    double adjusted_variance = 0.0;
    std::size_t pilot = 0;
};

/// Least-squares coefficients on the first `pilot` rows, estimate on the remaining rows.
inline ControlVariateFit control_variate(const Vector& y, const Matrix& X, const Vector& EX, std::size_t pilot) {
    const auto n = static_cast<std::size_t>(y.size());
    if (static_cast<std::size_t>(X.rows()) != n || X.cols() != EX.size()) throw ConfigError("control variate: shapes");
    if (pilot < 2 || pilot + 2 > n) throw ConfigError("control variate: pilot must leave at least two paths");
    ControlVariateFit f;
    f.pilot = pilot;
    const auto P = static_cast<Eigen::Index>(pilot);
    Matrix A(P, X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X.topRows(P);
    const Vector beta = A.colPivHouseholderQr().solve(y.head(P));
    f.coef = beta.tail(X.cols());
    const Eigen::Index m = static_cast<Eigen::Index>(n - pilot);
    const Vector yr = y.tail(m);
    const Vector adj = yr - (X.bottomRows(m).rowwise() - EX.transpose()) * f.coef;
    auto var = [](const Vector& v) {
        const double mu = v.mean();
        return (v.array() - mu).square().sum() / static_cast<double>(v.size() - 1);
    };
    f.estimate = adj.mean();
    f.raw_variance = var(yr);
    f.adjusted_variance = var(adj);
    f.stderr_ = std::sqrt(f.adjusted_variance / static_cast<double>(m));
    return f;
}

struct SpreadEstimate {
    double spread = 0.0;
    double stderr_ = 0.0;
    double lo99 = 0.0, hi99 = 0.0;
    double survival = 0.0;  // fraction of paths with τ > T
    double survival_stderr = 0.0;
    std::uint64_t n = 0;
};

inline constexpr double kZ99 = 2.5758293035489004;

/// mean(DL)/mean(A) with a delta-method standard error.
inline SpreadEstimate spread_from_legs(const Vector& dl, const Vector& ann, const Vector& survived) {
    SpreadEstimate e;
    const auto n = dl.size();
    e.n = static_cast<std::uint64_t>(n);
    const double mdl = dl.mean(), ma = ann.mean();
    e.spread = mdl / ma;
    const Vector resid = dl - e.spread * ann;
    const double v = (resid.array() - resid.mean()).square().sum() / static_cast<double>(n - 1);
    e.stderr_ = std::sqrt(v / static_cast<double>(n)) / ma;
    e.lo99 = e.spread - kZ99 * e.stderr_;
    e.hi99 = e.spread + kZ99 * e.stderr_;
    e.survival = survived.mean();
    e.survival_stderr = std::sqrt(e.survival * (1.0 - e.survival) / static_cast<double>(n));
    return e;
}

// ----------------------------------------------------------------------------
// Swaption on the forward market model.

/// (∏(1+τ_i R^i) − 1 − K Σ_i τ_i ∏_{j>i}(1+τ_j R^j))_+ × P(0,T_0)/∏(1+τ_i R^i_0).
inline double swaption_value(const FMMSpec& spec, const double* R, double K, double discount) {
    const std::size_t n = spec.n();
    double prod = 1.0, fixed = 0.0, prod0 = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        fixed += spec.tau(i) * prod;  // ∏_{j>i}
        prod *= 1.0 + spec.tau(i) * R[i];
        prod0 *= 1.0 + spec.tau(i) * spec.R0(i);
    }
    return std::max(prod - 1.0 - K * fixed, 0.0) * discount / prod0;
}

struct SwaptionSpec {
    FMMSpec fmm;
    double strike = 0.02;
    double discount = 1.0;  // P(0, T_0)
    double beta = 0.0;      // BG index of the driver, for the time cap h^β
    double eps_scale = 1.0;
};

inline Payoff swaption_payoff(const SwaptionSpec& sw) {
    sw.fmm.validate();
    Payoff p;
    p.name = "swaption";
    const double expiry = sw.fmm.tenor.front();
    p.request.mode = PathMode::times;
    p.request.grid = euler_grid_fn(sw.beta, expiry, sw.eps_scale);
    auto cache = std::make_shared<FMMLevelCache>(sw.fmm);
    p.eval = [cache, sw](const PathSkeleton& s) {
        if (!s.table) throw EvaluationError("swaption: path has no jump table");
        if (s.T != sw.fmm.tenor.front()) throw EvaluationError("swaption: simulate up to the first tenor date");
        EulerPath z;
        euler_path(cache->sde(*s.table), s, z);
        if (!z.finite) return std::numeric_limits<double>::quiet_NaN();
        return swaption_value(sw.fmm, z.endpoint().data(), sw.strike, sw.discount);
    };
    return p;
}

/// Endpoint of a scalar SDE solved by Euler on each level's breakpoints.
inline Payoff sde_endpoint_payoff(SDESpec sde, double beta, double T, double eps_scale = 1.0) {
    Payoff p;
    p.name = "sde_endpoint";
    p.request.mode = PathMode::times;
    p.request.grid = euler_grid_fn(beta, T, eps_scale);
    auto spec = std::make_shared<const SDESpec>(std::move(sde));
    p.eval = [spec](const PathSkeleton& s) {
        EulerPath z;
        euler_path(*spec, s, z);
        return z.finite ? z.endpoint()(0) : std::numeric_limits<double>::quiet_NaN();
    };
    p.lipschitz = 1.0;
    return p;
}

/// The example 5×5 swaption: five annual rates from 5y, CGMY(0.2)/CGMY(0.4) under Clayton(0.7, 0.3).
inline SwaptionSpec swaption_example() {
    SwaptionSpec s;
    s.fmm.tenor = {5, 6, 7, 8, 9, 10};
    s.fmm.R0 = Vector::Constant(5, 0.02);
    s.fmm.sigma.resize(5, 2);
    s.fmm.sigma << 0.50, 1.50, 0.80, 1.25, 1.00, 1.00, 1.25, 0.80, 1.50, 0.50;
    s.strike = 0.02;
    s.discount = std::pow(1.02, -5.0);
    s.beta = 0.4;
    return s;
}

inline CopulaMeasure swaption_example_driver() {
    return CopulaMeasure(ClaytonCopula(0.7, 0.3, 2), {LevyModel1D::cgmy({1.23, 15.0, 20.0, 0.2}),
                                                      LevyModel1D::cgmy({0.70, 15.0, 20.0, 0.4})});
}

}  // namespace levymlmc
