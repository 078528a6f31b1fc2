#pragma once

// Jump-adapted Euler scheme for dZ = a(t, Z_-) dX + b(t, Z_-) dt driven by X^h,
// and the Lévy forward market model built on it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "levymlmc/path_sim.hpp"

namespace levymlmc {

/// Coefficients of the SDE; b may be left empty when there is no dt term.
struct SDESpec {
    std::size_t m = 1;
    std::size_t d = 1;
    Vector z0;
    double K = std::numeric_limits<double>::quiet_NaN();  // declared Lipschitz constant
    std::function<void(double t, const Vector& z, Matrix& a, Vector& b)> coeff;
};

/// dZ = A dX.
inline SDESpec constant_sde(const Matrix& A, const Vector& z0) {
    SDESpec s;
    s.m = A.rows();
    s.d = A.cols();
    s.z0 = z0;
    s.K = 0.0;
    s.coeff = [A](double, const Vector&, Matrix& a, Vector& b) {
        a = A;
        b.resize(0);
    };
    return s;
}

/// Scalar dZ = Z_- dX.
inline SDESpec geometric_sde(double z0) {
    SDESpec s;
    s.z0 = Vector::Constant(1, z0);
    s.K = 1.0;
    s.coeff = [](double, const Vector& z, Matrix& a, Vector& b) {
        a.resize(1, 1);
        a(0, 0) = z(0);
        b.resize(0);
    };
    return s;
}

/// Breakpoints of Z^h; values hold m entries per breakpoint.
struct EulerPath {
    std::size_t m = 1;
    std::vector<double> times;
    std::vector<double> values;
    bool finite = true;

    std::size_t steps() const { return times.size(); }
    const double* value(std::size_t i) const { return values.data() + i * m; }
    Eigen::Map<const Vector> endpoint() const { return {values.data() + values.size() - m, static_cast<Eigen::Index>(m)}; }

    /// Z at time t (right-continuous, piecewise constant); z0 before the first breakpoint.
    Vector at(double t, const Vector& z0) const {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return z0;
        const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
        return Eigen::Map<const Vector>(value(i), static_cast<Eigen::Index>(m));
    }
};

/// Anchored grid {kε : k ≥ 1, kε < T} with ε = scale·h^β.
inline std::vector<double> euler_grid(double h, double beta, double T, double scale = 1.0) {
    const double eps = scale * std::pow(h, beta);
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("euler: time cap must be positive");
    std::vector<double> g;
    for (std::uint64_t k = 1;; ++k) {
        const double t = static_cast<double>(k) * eps;
        if (t >= T) break;
        g.push_back(t);
    }
    return g;
}

inline std::function<std::vector<double>(double)> euler_grid_fn(double beta, double T, double scale = 1.0) {
    if (!(scale > 0.0)) throw ConfigError("euler: time cap scale must be positive");
    return [=](double h) { return euler_grid(h, beta, T, scale); };
}

/// Euler recursion on the level's own breakpoints (jumps, grid and observation
/// points, and T). Over runs of identical coefficients the increments are taken
/// from the run's anchor, which is the same recursion without re-rounding, so a
/// constant coefficient gives z0 + A·X_t exactly.
inline void euler_path(const SDESpec& sde, const PathSkeleton& driver, EulerPath& out) {
    if (driver.mode != PathMode::times) throw ConfigError("euler: the driver must be simulated in times mode");
    if (driver.d != sde.d) throw ConfigError("euler: driver dimension does not match the coefficient");
    const std::size_t m = sde.m, d = sde.d;
    out.m = m;
    out.times.clear();
    out.values.clear();
    out.finite = true;
    Matrix a, a_next;
    Vector b, b_next;
    Vector z = sde.z0, anchor_z = sde.z0, anchor_x = Vector::Zero(d);
    double anchor_t = 0.0;
    sde.coeff(0.0, z, a, b);
    const std::size_t n = driver.points();
    for (std::size_t i = 0; i < n; ++i) {
        if (driver.flags[i] == 0 && i + 1 != n) continue;
        const double t = driver.times[i];
        const Eigen::Map<const Vector> x(driver.value(i), static_cast<Eigen::Index>(d));
        z = anchor_z + a * (x - anchor_x);
        if (b.size()) z += b * (t - anchor_t);
        out.times.push_back(t);
        out.values.insert(out.values.end(), z.data(), z.data() + m);
        if (!z.allFinite()) {
            out.finite = false;
            return;
        }
        if (i + 1 == n) break;
        sde.coeff(t, z, a_next, b_next);
        const bool same = a_next.rows() == a.rows() && a_next.cols() == a.cols() && a_next == a &&
                          b_next.size() == b.size() && (b.size() == 0 || b_next == b);
        if (!same) {
            a.swap(a_next);
            b.swap(b_next);
            anchor_z = z;
            anchor_x = x;
            anchor_t = t;
        }
    }
}

struct CoupledEulerPair {
    EulerPath fine;
    EulerPath coarse;
};

/// Both legs of a coupled driver pair, each on its own breakpoints of the shared skeleton.
inline void coupled_euler(const SDESpec& sde, const CoupledPathPair& pair, CoupledEulerPair& out) {
    euler_path(sde, pair.fine, out.fine);
    euler_path(sde, pair.coarse, out.coarse);
}

inline void coupled_euler(const SDESpec& fine, const SDESpec& coarse, const CoupledPathPair& pair,
                          CoupledEulerPair& out) {
    euler_path(fine, pair.fine, out.fine);
    euler_path(coarse, pair.coarse, out.coarse);
}

// ----------------------------------------------------------------------------
// Forward market model with a Lévy driver, under the terminal measure.

struct FMMSpec {
    std::vector<double> tenor;  // T_0 < … < T_n; rate i accrues over [T_{i−1}, T_i]
    Vector R0;                  // n initial forwards
    Matrix sigma;               // n×d loadings

    std::size_t n() const { return tenor.size() - 1; }
    std::size_t d() const { return static_cast<std::size_t>(sigma.cols()); }
    double tau(std::size_t i) const { return tenor[i + 1] - tenor[i]; }

    /// 1 before the accrual start, linear down to 0 at its end.
    double g(std::size_t i, double t) const {
        if (t <= tenor[i]) return 1.0;
        if (t >= tenor[i + 1]) return 0.0;
        return (tenor[i + 1] - t) / (tenor[i + 1] - tenor[i]);
    }

    Matrix gamma(double t) const {
        Matrix G = sigma;
        for (std::size_t i = 0; i < n(); ++i) G.row(i) *= g(i, t);
        return G;
    }

    void validate() const {
        if (tenor.size() < 2) throw ConfigError("fmm: need at least two tenor dates");
        for (std::size_t i = 1; i < tenor.size(); ++i)
            if (!(tenor[i] > tenor[i - 1])) throw ConfigError("fmm: tenor dates must increase");
        if (static_cast<std::size_t>(R0.size()) != n() || static_cast<std::size_t>(sigma.rows()) != n())
            throw ConfigError("fmm: R0 and sigma need one row per accrual period");
        if ((R0.array() <= 0.0).any()) throw ConfigError("fmm: initial forwards must be positive");
    }
};

/// Second moment of the discretized driver: Σ_s s sᵀ mass(s) + C_h.
inline Matrix fmm_second_moment(const JumpTable& t) {
    Matrix Q = t.C_h;
    Vector z(t.d);
    for (std::size_t s = 0; s < t.size(); ++s) {
        for (std::size_t j = 0; j < t.d; ++j) z(j) = t.coord(s, j);
        Q.noalias() += t.mass[s] * z * z.transpose();
    }
    return Q;
}

/// First-order drift: −Σ_{j>i} w_j γ^i Q γ^{jᵀ}, w_j = τ_j R^j/(1 + τ_j R^j).
inline Vector fmm_drift(const FMMSpec& spec, double t, const Vector& R, const Matrix& Q) {
    const std::size_t n = spec.n();
    const Matrix G = spec.gamma(t);
    const Matrix GQ = G * Q;
    Vector acc = Vector::Zero(spec.d());  // Σ_{j>i} w_j γ^j
    Vector out(n);
    for (std::size_t k = n; k-- > 0;) {
        out(k) = -GQ.row(k).dot(acc);
        const double w = spec.tau(k) * R(k) / (1.0 + spec.tau(k) * R(k));
        acc += w * G.row(k).transpose();
    }
    return out;
}

/// Same drift as a direct sum over the lattice states of the table.
inline Vector fmm_drift(const FMMSpec& spec, double t, const Vector& R, const JumpTable& table) {
    const std::size_t n = spec.n();
    const Matrix G = spec.gamma(t);
    Vector out = Vector::Zero(n);
    Vector z(table.d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = spec.tau(j) * R(j) / (1.0 + spec.tau(j) * R(j));
            double s = G.row(i) * table.C_h * G.row(j).transpose();
            for (std::size_t st = 0; st < table.size(); ++st) {
                for (std::size_t c = 0; c < table.d; ++c) z(c) = table.coord(st, c);
                s += table.mass[st] * G.row(i).dot(z) * G.row(j).dot(z);
            }
            out(i) -= w * s;
        }
    }
    return out;
}

/// dR^i = R^i_- (drift_i dt + γ^i(t) dX), coefficients frozen over each step.
inline SDESpec fmm_sde(const FMMSpec& spec, const Matrix& Q) {
    spec.validate();
    SDESpec s;
    s.m = spec.n();
    s.d = spec.d();
    s.z0 = spec.R0;
    s.coeff = [spec, Q](double t, const Vector& R, Matrix& a, Vector& b) {
        a = R.asDiagonal() * spec.gamma(t);
        b = R.cwiseProduct(fmm_drift(spec, t, R, Q));
    };
    return s;
}

/// Per-level FMM coefficients, built once per jump table and shared by all workers.
class FMMLevelCache {
  public:
    explicit FMMLevelCache(FMMSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const FMMSpec& spec() const { return spec_; }

    const SDESpec& sde(const JumpTable& table) {
        std::lock_guard<std::mutex> lock(mu_);
        const Key key{&table, table.h, table.total_rate};
        auto it = by_table_.find(key);
        if (it == by_table_.end())
            it = by_table_.emplace(key, std::make_unique<SDESpec>(fmm_sde(spec_, fmm_second_moment(table)))).first;
        return *it->second;
    }

  private:
    using Key = std::tuple<const JumpTable*, double, double>;
    FMMSpec spec_;
    std::mutex mu_;
    std::map<Key, std::unique_ptr<SDESpec>> by_table_;
};

}  // namespace levymlmc
