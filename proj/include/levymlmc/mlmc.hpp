#pragma once

// Multilevel estimator over h_l = h0·2^{−l}: per-level coupled sampling,
// optimal allocation, level selection and convergence diagnostics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levymlmc/path_sim.hpp"

namespace levymlmc {

class DiagnosticsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Running sums of one level: fine payoff P_l, coarse payoff P_{l−1}, and Y = P_l − P_{l−1}.
struct LevelStats {
    std::uint64_t n = 0;
    std::uint64_t nonfinite = 0;
    CompensatedSum f1, f2, y1, y2;
    OpCounter ops;

    void merge(const LevelStats& o) {
        n += o.n;
        nonfinite += o.nonfinite;
        f1.add(o.f1.value());
        f2.add(o.f2.value());
        y1.add(o.y1.value());
        y2.add(o.y2.value());
        ops += o.ops;
    }

    double mean_y() const { return n ? y1.value() / static_cast<double>(n) : 0.0; }
    double mean_f() const { return n ? f1.value() / static_cast<double>(n) : 0.0; }
    double var_y() const { return var(y1, y2); }
    double var_f() const { return var(f1, f2); }
    double cost() const { return n ? static_cast<double>(ops.total()) / static_cast<double>(n) : 0.0; }
    double fine_cost() const { return n ? static_cast<double>(ops.single_level()) / static_cast<double>(n) : 0.0; }

  private:
    double var(const CompensatedSum& s1, const CompensatedSum& s2) const {
        if (n < 2) return 0.0;
        const double nn = static_cast<double>(n);
        const double m = s1.value() / nn;
        return std::max(0.0, (s2.value() - nn * m * m) / (nn - 1.0));
    }
};

/// Everything needed to simulate any level of one problem.
struct LevelProblem {
    LevyTriplet triplet;
    DriftMode drift = DriftMode::given;
    double T = 1.0;
    GridSpec grid;  // h is ignored; R must be a multiple of h0
    double h0 = 0.01;
    Payoff payoff;
};

/// Lazily built tables, processes and mark tables per level; thread-safe sampling.
class LevelEngine {
  public:
    LevelEngine(LevelProblem problem, std::uint64_t seed, unsigned threads = 1, bool verify_coupling = true)
        : p_(std::move(problem)), seed_(seed), threads_(std::max(1u, threads)), verify_(verify_coupling) {
        if (!(p_.h0 > 0.0 && p_.h0 <= 1.0)) throw ConfigError("mlmc: h0 must lie in (0,1]");
        const double ratio = p_.grid.R / p_.h0;
        if (std::fabs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw ConfigError("mlmc: R must be a multiple of h0");
        p_.grid.R = std::round(ratio) * p_.h0;
    }

    const LevelProblem& problem() const { return p_; }
    double h(int l) const { return std::ldexp(p_.h0, -l); }
    double beta() const { return p_.triplet.measure.bg_index(); }
    std::uint64_t seed() const { return seed_; }
    void reseed(std::uint64_t seed) { seed_ = seed; }

    const SchemeProcess& process(int l) { return level(l).proc; }

    /// Mark table of the pair (h_l, h_{l−1}); verifies the rate identity first when enabled.
    const MarkTable& marks(int l) {
        if (l < 1) throw ConfigError("mlmc: level 0 has no coarse partner");
        const Level& C = level(l - 1);
        Level& L = level(l);
        std::lock_guard<std::mutex> lock(mu_);
        if (!L.marks) {
            L.marks = std::make_unique<MarkTable>(build_mark_table(*L.proc.table, p_.triplet.measure));
            if (verify_) {
                const auto rep = verify_rate_identity(*L.proc.table, *C.proc.table,
                                                      p_.triplet.measure, *L.marks);
                L.identity_error = rep.max_rel_error;
                if (!rep.passed)
                    throw std::runtime_error("coupling rate identity fails at level " + std::to_string(l) +
                                             " (max relative error " + std::to_string(rep.max_rel_error) + ")");
            }
        }
        return *L.marks;
    }

    std::optional<double> identity_error(int l) const {
        if (l >= static_cast<int>(levels_.size()) || !levels_[l] || !levels_[l]->marks || !verify_) return {};
        return levels_[l]->identity_error;
    }

    /// Samples paths [first, first+count) of level l.
    LevelStats sample(int l, std::uint64_t first, std::uint64_t count) {
        const SchemeProcess& fine = process(l);
        const SchemeProcess* coarse = l > 0 ? &process(l - 1) : nullptr;
        const MarkTable* mt = l > 0 ? &marks(l) : nullptr;
        const std::vector<double>* gf = grid_times(l);
        const std::vector<double>* gc = l > 0 ? grid_times(l - 1) : nullptr;
        const Payoff& pay = p_.payoff;
        auto blocks = run_blocks<LevelStats>(first, count, threads_, [&](std::uint64_t b, std::uint64_t e) {
            LevelStats s;
            PathWorkspace ws;
            CoupledPathPair pair;
            for (std::uint64_t i = b; i < e; ++i) {
                Rng rng = Rng::for_path(seed_, static_cast<std::uint64_t>(l), i);
                double pf, pc = 0.0;
                if (coarse) {
                    simulate_coupled_paths(fine, *coarse, *mt, pay.request, rng, ws, pair, &s.ops, gf, gc);
                    pf = pay.eval(pair.fine);
                    pc = pay.eval(pair.coarse);
                } else {
                    simulate_path(fine, pay.request, rng, ws, pair.fine, &s.ops, gf);
                    pf = pay.eval(pair.fine);
                }
                if (!std::isfinite(pf) || !std::isfinite(pc)) {
                    ++s.nonfinite;
                    continue;
                }
                const double y = pf - pc;
                s.f1.add(pf);
                s.f2.add(pf * pf);
                s.y1.add(y);
                s.y2.add(y * y);
                ++s.n;
            }
            return s;
        });
        LevelStats out;
        for (const auto& b : blocks) out.merge(b);
        detail::check_nonfinite(out.nonfinite, count);
        return out;
    }

  private:
    struct Level {
        SchemeProcess proc;
        std::unique_ptr<MarkTable> marks;
        std::optional<std::vector<double>> grid;
        double identity_error = 0.0;
    };

    Level& level(int l) {
        if (l < 0 || l > 30) throw ConfigError("mlmc: level out of range");
        std::lock_guard<std::mutex> lock(mu_);
        if (static_cast<int>(levels_.size()) <= l) levels_.resize(l + 1);
        if (!levels_[l]) {
            GridSpec g = p_.grid;
            g.h = h(l);
            auto table = std::make_shared<const JumpTable>(build_jump_table(p_.triplet.measure, g));
            auto L = std::make_unique<Level>();
            L->proc = make_process(p_.triplet, std::move(table), p_.T, p_.drift);
            if (p_.payoff.request.grid) L->grid = p_.payoff.request.grid(h(l));
            levels_[l] = std::move(L);
        }
        return *levels_[l];
    }

    const std::vector<double>* grid_times(int l) {
        Level& L = level(l);
        return L.grid ? &*L.grid : nullptr;
    }

    LevelProblem p_;
    std::uint64_t seed_;
    unsigned threads_;
    bool verify_;
    std::mutex mu_;
    std::vector<std::unique_ptr<Level>> levels_;
};

struct MLMCConfig {
    double eps = 0.05;
    std::uint64_t pilot_paths = 10000;
    int min_levels = 2;  // L starts here
    int max_levels = 10;
    double theta_stat = 0.5;  // share of ε² given to the statistical error
    std::optional<double> D_B;
    std::optional<double> beta;  // defaults to the measure's BG index
};

struct LevelReport {
    int level = 0;
    double h = 0.0;
    std::uint64_t n = 0;
    double mean = 0.0;  // E[P_l − P_{l−1}]
    double var = 0.0;
    double cost = 0.0;  // ops per sample
    double mean_fine = 0.0;
    double var_fine = 0.0;
    double fine_cost = 0.0;
};

struct MLMCReport {
    std::vector<LevelReport> levels;
    double estimate = 0.0;
    double bias = 0.0;
    double stat_error = 0.0;  // sqrt(Σ V_l/N_l)
    double mse = 0.0;
    double total_cost = 0.0;
    double mc_proxy_cost = 0.0;  // V_0 C_L/(θ_stat ε²): plain MC with the same variance budget
    int L = 0;
    int level_cap = 0;
    bool converged = false;
    double eps = 0.0;
    double wall_seconds = 0.0;
};

/// floor((log(3 D_B h0^{2−β}) − 2 log ε)/((2−β) log 2)).
inline int max_level_bound(double D_B, double h0, double beta, double eps) {
    const double v = (std::log(3.0 * D_B * std::pow(h0, 2.0 - beta)) - 2.0 * std::log(eps)) /
                     ((2.0 - beta) * std::log(2.0));
    return static_cast<int>(std::floor(v));
}

/// N_l = ⌈ε^{−2} θ^{−1} √(V_l/C_l) Σ_j √(V_j C_j)⌉.
inline std::vector<std::uint64_t> optimal_allocation(const std::vector<double>& V, const std::vector<double>& C,
                                                     double eps, double theta) {
    double s = 0.0;
    for (std::size_t l = 0; l < V.size(); ++l) s += std::sqrt(V[l] * C[l]);
    std::vector<std::uint64_t> N(V.size(), 0);
    for (std::size_t l = 0; l < V.size(); ++l) {
        if (V[l] <= 0.0 || C[l] <= 0.0) continue;
        N[l] = static_cast<std::uint64_t>(std::ceil(std::sqrt(V[l] / C[l]) * s / (theta * eps * eps)));
    }
    return N;
}

namespace detail {

inline void check_variance_trend(const std::vector<LevelStats>& st) {
    int run = 0;
    for (std::size_t l = 2; l < st.size(); ++l) {
        const double a = st[l - 1].var_y(), b = st[l].var_y();
        run = (a > 0.0 && b > 1.1 * a) ? run + 1 : 0;
        if (run >= 3)
            throw DiagnosticsError("level variances grew by more than 10% on three consecutive levels (up to level " +
                                   std::to_string(l) + "): coupling suspect");
    }
}

}  // namespace detail

inline MLMCReport run_mlmc(LevelEngine& engine, const MLMCConfig& cfg) {
    if (!(cfg.eps > 0.0)) throw ConfigError("mlmc: eps must be positive");
    if (cfg.pilot_paths < 2) throw ConfigError("mlmc: pilot needs at least two paths");
    const auto t0 = std::chrono::steady_clock::now();
    const double beta = cfg.beta.value_or(engine.beta());
    const double alpha = 1.0 - beta / 2.0;
    int cap = cfg.max_levels;
    if (cfg.D_B) cap = std::min(cap, max_level_bound(*cfg.D_B, engine.problem().h0, beta, cfg.eps));
    cap = std::max(cap, 0);
    int L = std::min(cfg.min_levels, cap);
    const bool constant = engine.problem().payoff.constant;

    std::vector<LevelStats> st(L + 1);
    std::vector<std::uint64_t> dN(L + 1, cfg.pilot_paths);
    MLMCReport rep;
    rep.eps = cfg.eps;
    rep.level_cap = cap;
    for (;;) {
        for (int l = 0; l <= L; ++l) {
            if (dN[l] == 0) continue;
            st[l].merge(engine.sample(l, st[l].n + st[l].nonfinite, dN[l]));
        }
        if (st[0].var_y() == 0.0 && !constant)
            throw ConfigError("mlmc: zero pilot variance at level 0 for a payoff not declared constant");
        detail::check_variance_trend(st);

        std::vector<double> V(L + 1), C(L + 1);
        for (int l = 0; l <= L; ++l) {
            V[l] = constant ? 0.0 : st[l].var_y();
            C[l] = st[l].cost();
        }
        const auto N = optimal_allocation(V, C, cfg.eps, cfg.theta_stat);
        bool more = false;
        for (int l = 0; l <= L; ++l) {
            dN[l] = N[l] > st[l].n ? N[l] - st[l].n : 0;
            more = more || dN[l] > 0;
        }
        if (more) continue;

        const double a2 = std::pow(2.0, alpha);
        const double yl = std::fabs(st[L].mean_y());
        const double yl1 = L > 0 ? std::fabs(st[L - 1].mean_y()) / a2 : 0.0;
        rep.bias = std::max(yl, yl1) / (a2 - 1.0);
        if (constant || rep.bias <= cfg.eps / std::sqrt(2.0)) {
            rep.converged = true;
            break;
        }
        if (L >= cap) break;
        ++L;
        st.emplace_back();
        dN.assign(L + 1, 0);
        dN[L] = cfg.pilot_paths;
    }

    rep.L = L;
    double var_sum = 0.0;
    for (int l = 0; l <= L; ++l) {
        LevelReport lr;
        lr.level = l;
        lr.h = engine.h(l);
        lr.n = st[l].n;
        lr.mean = st[l].mean_y();
        lr.var = constant ? 0.0 : st[l].var_y();
        lr.cost = st[l].cost();
        lr.mean_fine = st[l].mean_f();
        lr.var_fine = st[l].var_f();
        lr.fine_cost = st[l].fine_cost();
        rep.estimate += lr.mean;
        rep.total_cost += static_cast<double>(st[l].ops.total());
        var_sum += lr.var / static_cast<double>(lr.n);
        rep.levels.push_back(lr);
    }
    rep.stat_error = std::sqrt(var_sum);
    rep.mse = rep.bias * rep.bias + var_sum;
    rep.mc_proxy_cost = rep.levels[0].var * rep.levels[L].fine_cost / (cfg.theta_stat * cfg.eps * cfg.eps);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ----------------------------------------------------------------------------
// Diagnostics

struct Slope {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of y on x with its standard error (NaN when undetermined).
inline Slope regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    Slope s;
    const std::size_t n = x.size();
    if (n < 2) return s;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    s.slope = sxy / sxx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - my - s.slope * (x[i] - mx);
            ssr += r * r;
        }
        s.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    }
    return s;
}

struct DiagnosticsRow {
    int level;
    double log2_var_Pl;
    double log2_var_diff;
    double log2_mean_Pl;
    double log2_mean_diff;
    double cost;
    std::uint64_t n;
};

struct DiagnosticsTable {
    std::vector<DiagnosticsRow> rows;
    Slope var_slope;   // of log2 V[P_l − P_{l−1}] over levels 1..L
    Slope mean_slope;  // of log2 |E[P_l − P_{l−1}]| over levels 1..L
};

inline DiagnosticsTable level_diagnostics(LevelEngine& engine, int L, std::uint64_t paths) {
    if (L < 0) throw ConfigError("diagnostics: L must be nonnegative");
    DiagnosticsTable t;
    std::vector<double> lv, ly, lm;
    for (int l = 0; l <= L; ++l) {
        const LevelStats s = engine.sample(l, 0, paths);
        DiagnosticsRow r{l,
                         std::log2(s.var_f()),
                         std::log2(s.var_y()),
                         std::log2(std::fabs(s.mean_f())),
                         std::log2(std::fabs(s.mean_y())),
                         s.cost(),
                         s.n};
        t.rows.push_back(r);
        if (l >= 1) {
            lv.push_back(l);
            ly.push_back(r.log2_var_diff);
            lm.push_back(r.log2_mean_diff);
        }
    }
    if (lv.size() >= 2) {
        t.var_slope = regression_slope(lv, ly);
        t.mean_slope = regression_slope(lv, lm);
    }
    return t;
}

struct CostCurvePoint {
    double eps;
    int levels;
    double total_cost;
    double mc_proxy_cost;
    double eps2_cost;
    std::vector<std::uint64_t> N;
};

/// MLMC runs for each ε (independent streams per ε), with the reference exponent 4(β−1)/(2−β).
inline std::vector<CostCurvePoint> cost_curve(LevelEngine& engine, const std::vector<double>& eps_list,
                                              MLMCConfig cfg) {
    std::vector<CostCurvePoint> out;
    const std::uint64_t root = engine.seed();
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        std::uint64_t s = root + i;
        engine.reseed(splitmix64(s));
        cfg.eps = eps_list[i];
        const MLMCReport r = run_mlmc(engine, cfg);
        CostCurvePoint p{r.eps, r.L, r.total_cost, r.mc_proxy_cost, r.eps * r.eps * r.total_cost, {}};
        for (const auto& lr : r.levels) p.N.push_back(lr.n);
        out.push_back(std::move(p));
    }
    engine.reseed(root);
    return out;
}

inline double cost_reference_exponent(double beta) { return 4.0 * (beta - 1.0) / (2.0 - beta); }

}  // namespace levymlmc
