#pragma once

// Paths of the chain scheme
//   X^h_t = (μ + μ̃)t + σW_t + c^h B_t + X^{h(λ)}_t − μ^{h(λ)} t
// alone or coupled with the 2h chain, plus the plain Monte-Carlo estimator.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "levymlmc/coupling.hpp"

namespace levymlmc {

/// Diffusion matrix Σ, drift μ and jump measure.
struct LevyTriplet {
    Matrix Sigma;
    Vector mu;
    JumpMeasure measure;
};

/// Triplet with Σ = diag(σ_j²) from the margins' own diffusion and μ = 0.
inline LevyTriplet make_triplet(const JumpMeasure& measure) {
    const std::size_t d = measure.dim();
    LevyTriplet t{Matrix::Zero(d, d), Vector::Zero(d), measure};
    for (std::size_t j = 0; j < d; ++j) {
        const double s = measure.margin(j).diffusion_sigma();
        t.Sigma(j, j) = s * s;
    }
    return t;
}

enum class DriftMode {
    given,        // μ as in the triplet
    martingale,   // μ = −μ̃, so E[X^h_t] = 0
    exponential,  // μ such that E[exp(X^h_t)_j] = 1 for every coordinate
};

/// log E[exp(X^h_1)_j] of the scheme with linear drift b = μ + μ̃ − μ^{h(λ)}.
inline Vector scheme_log_mgf(const JumpTable& t, const Matrix& Sigma, const Vector& b) {
    Vector psi = b;
    for (std::size_t j = 0; j < t.d; ++j) {
        psi(j) += 0.5 * (Sigma(j, j) + t.C_h(j, j));
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += std::expm1(t.coord(i, j)) * t.mass[i];
        psi(j) += s;
    }
    return psi;
}

struct SchemeProcess {
    std::shared_ptr<const JumpTable> table;
    double T = 1.0;
    std::size_t d = 1;
    Vector mu;
    Vector drift;  // μ + μ̃ − μ^{h(λ)}
    Matrix sigma;  // σσᵀ = Σ
    Matrix phi;    // φφᵀ = Σ + C_h
    bool brownian = false;
    bool small_jump_gauss = false;

    double h() const { return table->h; }
};

inline SchemeProcess make_process(const LevyTriplet& tri, std::shared_ptr<const JumpTable> table, double T,
                                  DriftMode mode = DriftMode::given) {
    if (!(T > 0.0)) throw ConfigError("horizon T must be positive");
    const std::size_t d = table->d;
    if (static_cast<std::size_t>(tri.Sigma.rows()) != d || static_cast<std::size_t>(tri.mu.size()) != d)
        throw ConfigError("triplet dimension does not match the jump table");
    SchemeProcess p;
    p.T = T;
    p.d = d;
    p.sigma = detail::psd_sqrt(tri.Sigma, "diffusion matrix");
    p.phi = detail::psd_sqrt(tri.Sigma + table->C_h, "combined diffusion matrix");
    p.brownian = tri.Sigma.cwiseAbs().maxCoeff() > 0.0;
    p.small_jump_gauss = table->C_h.cwiseAbs().maxCoeff() > 0.0;
    const Vector base = table->mu_tilde - table->mu_h_lambda;
    switch (mode) {
        case DriftMode::given: p.mu = tri.mu; break;
        case DriftMode::martingale: p.mu = -table->mu_tilde; break;
        case DriftMode::exponential: p.mu = -scheme_log_mgf(*table, tri.Sigma, base); break;
    }
    p.drift = p.mu + base;
    p.table = std::move(table);
    return p;
}

enum class PathMode { counts, times };

namespace point_flag {
inline constexpr std::uint8_t observation = 1;
inline constexpr std::uint8_t grid = 2;  // the level's own deterministic breakpoint
inline constexpr std::uint8_t jump = 4;  // the level's own chain jumps here
}  // namespace point_flag

/// What a payoff needs from a path.
struct PathRequest {
    PathMode mode = PathMode::counts;
    std::vector<double> observations;                   // sorted, in (0, T]; T is always added
    std::function<std::vector<double>(double h)> grid;  // per-level deterministic breakpoints
};

struct PathSkeleton {
    PathMode mode = PathMode::counts;
    double h = 0.0;
    std::size_t d = 1;
    double T = 0.0;
    std::vector<double> times;
    std::vector<std::uint8_t> flags;
    std::vector<std::int32_t> jumps;  // d per point, lattice units of h
    std::vector<double> values;       // d per point, X at the point (after its jump)
    std::vector<std::int64_t> K;      // d, total lattice displacement
    Vector W_T, B_T;                  // Brownian totals (B_T unused in plain mode)
    Vector drift;
    Matrix sigma_w, sigma_b;          // loading matrices of W_T and B_T
    Vector endpoint;
    std::size_t n_jumps = 0;
    const JumpTable* table = nullptr;  // the level's table, alive as long as its process

    std::size_t points() const { return times.size(); }
    const double* value(std::size_t i) const { return values.data() + i * d; }
    const std::int32_t* jump(std::size_t i) const { return jumps.data() + i * d; }

    /// X at time t (piecewise constant between skeleton points; t must be a skeleton time or T).
    double coordinate_at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
};

namespace detail {

// The one expression every value and endpoint is computed with.
inline double compose(double drift, double t, double w, double b, double h, std::int64_t k) {
    return drift * t + w + b + h * static_cast<double>(k);
}

inline void compose_point(const PathSkeleton& p, double t, const Vector& W, const Vector& B,
                          const std::int64_t* K, double* out) {
    for (std::size_t j = 0; j < p.d; ++j) {
        const double w = p.sigma_w.row(j).dot(W);
        const double b = p.sigma_b.cols() ? p.sigma_b.row(j).dot(B) : 0.0;
        out[j] = compose(p.drift(j), t, w, b, p.h, K[j]);
    }
}

inline void merge_sorted(std::vector<double>& out, const std::vector<double>& a, const std::vector<double>& b) {
    out.clear();
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

}  // namespace detail

/// Endpoint recomputed from the skeleton's stored totals.
inline Vector endpoint_from_totals(const PathSkeleton& p) {
    Vector x(p.d);
    detail::compose_point(p, p.T, p.W_T, p.B_T, p.K.data(), x.data());
    return x;
}

/// Scratch buffers reused across paths by one worker.
struct PathWorkspace {
    std::vector<std::uint32_t> state;
    std::vector<std::uint32_t> entry;
    std::vector<double> jump_times;
    std::vector<double> det_fine, det_coarse, det_all, obs;
};

namespace detail {

struct LevelView {
    const SchemeProcess* proc;
    PathSkeleton* out;
    const std::vector<double>* grid;
    bool coupled_b;  // B kept separate from W
};

inline void init_skeleton(PathSkeleton& s, const SchemeProcess& p, PathMode mode, bool separate) {
    s.mode = mode;
    s.h = p.h();
    s.table = p.table.get();
    s.d = p.d;
    s.T = p.T;
    s.drift = p.drift;
    s.times.clear();
    s.flags.clear();
    s.jumps.clear();
    s.values.clear();
    s.K.assign(p.d, 0);
    s.n_jumps = 0;
    if (separate) {
        s.sigma_w = p.sigma;
        s.sigma_b = p.table->c_h;
    } else {
        s.sigma_w = p.phi;
        s.sigma_b.resize(p.d, 0);
    }
    s.W_T = Vector::Zero(p.d);
    s.B_T = Vector::Zero(separate ? p.d : 0);
}

}  // namespace detail

/// Simulates X^h alone (coarse == nullptr) or the pair (X^h, X̃^{2h}).
inline void simulate_levels(const SchemeProcess& fine, const SchemeProcess* coarse, const MarkTable* marks,
                            const PathRequest& req, const std::vector<double>* grid_fine,
                            const std::vector<double>* grid_coarse, Rng& rng, PathWorkspace& ws,
                            PathSkeleton& out_fine, PathSkeleton* out_coarse, OpCounter* ops = nullptr) {
    const std::size_t d = fine.d;
    const JumpTable& tf = *fine.table;
    const bool coupled = coarse != nullptr;
    if (coupled && (marks == nullptr || out_coarse == nullptr)) throw std::invalid_argument("coupled run needs marks");
    if (coupled && 2.0 * tf.h != coarse->table->h) throw ConfigError("coupled levels are not nested");
    const double T = fine.T;

    detail::init_skeleton(out_fine, fine, req.mode, coupled);
    if (coupled) detail::init_skeleton(*out_coarse, *coarse, req.mode, true);

    // Jump count and sizes.
    const std::uint64_t N = sample_poisson(T * tf.total_rate, rng, ops);
    ws.state.resize(N);
    ws.entry.resize(coupled ? N : 0);
    for (std::uint64_t n = 0; n < N; ++n) {
        const auto i = static_cast<std::uint32_t>(tf.sampler(rng, ops));
        ws.state[n] = i;
        const std::int32_t* k = tf.state(i);
        for (std::size_t j = 0; j < d; ++j) out_fine.K[j] += k[j];
        if (coupled) {
            const auto e = static_cast<std::uint32_t>(marks->sample(i, rng, ops));
            ws.entry[n] = e;
            if (!marks->pruned[e]) {
                ++out_coarse->n_jumps;
                for (std::size_t j = 0; j < d; ++j) out_coarse->K[j] += (k[j] + marks->mark(e)[j]) / 2;
            }
        }
    }
    out_fine.n_jumps = N;
    if (ops) ops->jumps += N;

    const bool gw = coupled ? fine.brownian : (fine.brownian || fine.small_jump_gauss);
    const bool gb = coupled && (fine.small_jump_gauss || coarse->small_jump_gauss);
    auto draw = [&](Vector& v, double sd) {
        for (std::size_t j = 0; j < d; ++j) v(j) = sd * rng.normal();
        if (ops) ops->gaussians += d;
    };

    if (req.mode == PathMode::counts) {
        const double sd = std::sqrt(T);
        Vector z(d);
        if (gw) {
            draw(z, sd);
            out_fine.W_T = z;
            if (coupled) out_coarse->W_T = z;
        }
        if (gb) {
            draw(z, sd);
            out_fine.B_T = z;
            out_coarse->B_T = z;
        }
        out_fine.endpoint = endpoint_from_totals(out_fine);
        if (coupled) out_coarse->endpoint = endpoint_from_totals(*out_coarse);
        return;
    }

    // Times mode: sorted jump times merged with observation and grid times.
    ws.jump_times.resize(N);
    for (std::uint64_t n = 0; n < N; ++n) ws.jump_times[n] = T * rng.uniform_open();
    std::sort(ws.jump_times.begin(), ws.jump_times.end());
    ws.obs = req.observations;
    if (ws.obs.empty() || ws.obs.back() != T) ws.obs.push_back(T);
    static const std::vector<double> none;
    const auto& gf = grid_fine ? *grid_fine : none;
    const auto& gc = grid_coarse ? *grid_coarse : none;
    detail::merge_sorted(ws.det_fine, ws.obs, gf);
    detail::merge_sorted(ws.det_all, ws.det_fine, gc);

    std::vector<PathSkeleton*> outs = {&out_fine};
    if (coupled) outs.push_back(out_coarse);
    Vector W = Vector::Zero(d), B = Vector::Zero(coupled ? d : 0), dz(d);
    std::vector<std::int64_t> Kf(d, 0), Kc(d, 0);
    std::size_t jn = 0, dn = 0;
    double t_prev = 0.0;
    const std::size_t total = N + ws.det_all.size();
    for (auto* o : outs) {
        o->times.reserve(total);
        o->flags.reserve(total);
        o->jumps.reserve(total * d);
        o->values.reserve(total * d);
    }
    std::size_t of = 0, oo = 0, oc = 0;  // cursors into fine grid, observations, coarse grid
    while (jn < N || dn < ws.det_all.size()) {
        const bool is_jump = jn < N && (dn >= ws.det_all.size() || ws.jump_times[jn] < ws.det_all[dn]);
        const double t = is_jump ? ws.jump_times[jn] : ws.det_all[dn];
        if (t > t_prev) {
            const double sd = std::sqrt(t - t_prev);
            if (gw) {
                draw(dz, sd);
                W += dz;
            }
            if (gb) {
                draw(dz, sd);
                B += dz;
            }
        }
        std::uint8_t det_f = 0, det_c = 0;
        if (!is_jump) {
            while (oo < ws.obs.size() && ws.obs[oo] < t) ++oo;
            while (of < gf.size() && gf[of] < t) ++of;
            while (oc < gc.size() && gc[oc] < t) ++oc;
            const bool obs = oo < ws.obs.size() && ws.obs[oo] == t;
            det_f = (obs ? point_flag::observation : 0) | (of < gf.size() && gf[of] == t ? point_flag::grid : 0);
            det_c = (obs ? point_flag::observation : 0) | (oc < gc.size() && gc[oc] == t ? point_flag::grid : 0);
        }
        const std::int32_t* k = is_jump ? tf.state(ws.state[jn]) : nullptr;
        for (std::size_t j = 0; j < d; ++j) out_fine.jumps.push_back(k ? k[j] : 0);
        if (k)
            for (std::size_t j = 0; j < d; ++j) Kf[j] += k[j];
        out_fine.times.push_back(t);
        out_fine.flags.push_back(is_jump ? point_flag::jump : det_f);
        out_fine.values.resize(out_fine.values.size() + d);
        detail::compose_point(out_fine, t, W, B, Kf.data(), out_fine.values.data() + out_fine.values.size() - d);
        if (coupled) {
            bool moved = false;
            if (k) {
                const std::uint32_t e = ws.entry[jn];
                moved = !marks->pruned[e];
                for (std::size_t j = 0; j < d; ++j) {
                    const std::int32_t kc = moved ? (k[j] + marks->mark(e)[j]) / 2 : 0;
                    out_coarse->jumps.push_back(kc);
                    Kc[j] += kc;
                }
            } else {
                for (std::size_t j = 0; j < d; ++j) out_coarse->jumps.push_back(0);
            }
            out_coarse->times.push_back(t);
            out_coarse->flags.push_back(k ? (moved ? point_flag::jump : 0) : det_c);
            out_coarse->values.resize(out_coarse->values.size() + d);
            detail::compose_point(*out_coarse, t, W, B, Kc.data(),
                                  out_coarse->values.data() + out_coarse->values.size() - d);
        }
        t_prev = t;
        if (is_jump) ++jn;
        else ++dn;
    }
    for (auto* o : outs) {
        o->W_T = W;
        if (coupled) o->B_T = B;
        o->endpoint = Eigen::Map<const Vector>(o->values.data() + o->values.size() - d, d);
    }
}

inline void simulate_path(const SchemeProcess& proc, const PathRequest& req, Rng& rng, PathWorkspace& ws,
                          PathSkeleton& out, OpCounter* ops = nullptr, const std::vector<double>* grid = nullptr) {
    simulate_levels(proc, nullptr, nullptr, req, grid, nullptr, rng, ws, out, nullptr, ops);
}

struct CoupledPathPair {
    PathSkeleton fine;
    PathSkeleton coarse;
};

inline void simulate_coupled_paths(const SchemeProcess& fine, const SchemeProcess& coarse, const MarkTable& marks,
                                   const PathRequest& req, Rng& rng, PathWorkspace& ws, CoupledPathPair& out,
                                   OpCounter* ops = nullptr, const std::vector<double>* grid_fine = nullptr,
                                   const std::vector<double>* grid_coarse = nullptr) {
    simulate_levels(fine, &coarse, &marks, req, grid_fine, grid_coarse, rng, ws, out.fine, &out.coarse, ops);
}

// ----------------------------------------------------------------------------
// Deterministic parallel reduction.

/// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

inline constexpr std::uint64_t kPathBlock = 4096;

/// Runs fn(block, begin, end) for fixed path blocks on `threads` workers and
/// returns the per-block results in block order.
template <class Result, class Fn>
std::vector<Result> run_blocks(std::uint64_t first, std::uint64_t count, unsigned threads, Fn fn) {
    const std::uint64_t nblocks = (count + kPathBlock - 1) / kPathBlock;
    std::vector<Result> out(nblocks);
    if (nblocks == 0) return out;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(nblocks)));
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= nblocks || failed.load()) return;
            const std::uint64_t begin = first + b * kPathBlock;
            const std::uint64_t end = std::min(first + count, begin + kPathBlock);
            try {
                out[b] = fn(begin, end);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ----------------------------------------------------------------------------
// Plain Monte Carlo.

struct Payoff {
    std::string name;
    PathRequest request;
    std::function<double(const PathSkeleton&)> eval;
    bool constant = false;
    double lipschitz = std::numeric_limits<double>::quiet_NaN();
};

struct MCResult {
    double estimate = 0.0;
    double stderr_ = 0.0;
    double variance = 0.0;
    std::uint64_t n = 0;
    std::uint64_t nonfinite = 0;
    OpCounter ops;
    double wall_seconds = 0.0;
};

class NonFiniteError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct MomentBlock {
    CompensatedSum s1, s2;
    std::uint64_t n = 0, nonfinite = 0;
    OpCounter ops;
};

// Non-finite payoffs: excluded with a warning up to 0.01% of the paths, fatal beyond.
inline void check_nonfinite(std::uint64_t bad, std::uint64_t total) {
    if (bad == 0) return;
    if (static_cast<double>(bad) > 1e-4 * static_cast<double>(total))
        throw NonFiniteError(std::to_string(bad) + " of " + std::to_string(total) + " payoffs are not finite");
}

}  // namespace detail

inline MCResult mc_estimate(const Payoff& payoff, const SchemeProcess& proc, std::uint64_t n, std::uint64_t seed,
                            unsigned threads = 1, std::uint64_t stream_level = 0) {
    if (n < 2) throw ConfigError("mc_estimate needs at least two paths");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> grid;
    if (payoff.request.grid) grid = payoff.request.grid(proc.h());
    auto blocks = run_blocks<detail::MomentBlock>(0, n, threads, [&](std::uint64_t b, std::uint64_t e) {
        detail::MomentBlock r;
        PathWorkspace ws;
        PathSkeleton sk;
        for (std::uint64_t i = b; i < e; ++i) {
            Rng rng = Rng::for_path(seed, stream_level, i);
            simulate_path(proc, payoff.request, rng, ws, sk, &r.ops, payoff.request.grid ? &grid : nullptr);
            const double y = payoff.eval(sk);
            if (!std::isfinite(y)) {
                ++r.nonfinite;
                continue;
            }
            r.s1.add(y);
            r.s2.add(y * y);
            ++r.n;
        }
        return r;
    });
    CompensatedSum s1, s2;
    MCResult res;
    for (const auto& b : blocks) {
        s1.add(b.s1.value());
        s2.add(b.s2.value());
        res.n += b.n;
        res.nonfinite += b.nonfinite;
        res.ops += b.ops;
    }
    detail::check_nonfinite(res.nonfinite, n);
    const double nn = static_cast<double>(res.n);
    res.estimate = s1.value() / nn;
    res.variance = payoff.constant ? 0.0 : std::max(0.0, (s2.value() - nn * res.estimate * res.estimate) / (nn - 1));
    res.stderr_ = std::sqrt(res.variance / nn);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace levymlmc
