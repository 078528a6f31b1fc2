#pragma once

// The jump lattice of the chain approximation: cells A^h_s on hZ^d ∩ [−R,R]^d,
// their masses, the discrete jump sampler, the small-jump covariance C_h and
// the drift terms μ̃ and μ^{h(λ)}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levymlmc/jump_measure.hpp"
#include "levymlmc/quadrature.hpp"
#include "levymlmc/sampling.hpp"

namespace levymlmc {

class SizingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    double h = 0.01;
    double R = 1.0;
    std::size_t d = 1;
    double V = 1.0;
    int subcells_K = 0;  // graded panels per axis for d ≥ 2 moment integrals; 0 = automatic
    std::uint64_t state_cap = 50'000'000;
    SamplerKind sampler = SamplerKind::alias;

    /// Number of lattice steps in R, rounded up so that R is a multiple of h.
    int n_R() const { return std::max(1, static_cast<int>(std::ceil(R / h - 1e-9))); }
    double R_aligned() const { return n_R() * h; }
};

inline void validate(const GridSpec& g, const JumpMeasure& m) {
    if (!(g.h > 0.0)) throw ConfigError("grid: h must be positive");
    if (!(g.R >= g.h)) throw ConfigError("grid: R must be at least h");
    if (g.d != m.dim()) throw ConfigError("grid: dimension does not match the measure");
    if (g.V != 0.0 && g.V != 1.0) throw ConfigError("grid: V must be 0 or 1");
    if (g.V == 0.0 && !m.finite_variation())
        throw ConfigError("grid: V = 0 requires finite-variation margins");
}

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct JumpTable {
    double h = 0.0;
    double R = 0.0;
    int n_R = 0;
    std::size_t d = 1;
    double V = 1.0;

    std::vector<std::int32_t> states;  // lattice indices, d per state, lexicographic
    std::vector<double> mass;
    double total_rate = 0.0;
    DiscreteSampler sampler;

    Vector mu_h_lambda;
    Vector mu_tilde;
    Matrix C_h;
    Matrix c_h;  // c_h c_hᵀ = C_h
    double cov_residual = 0.0;

    double dropped_mass = 0.0;
    std::size_t clamped_cells = 0;

    std::size_t size() const { return mass.size(); }
    double coord(std::size_t i, std::size_t j) const { return h * states[i * d + j]; }
    const std::int32_t* state(std::size_t i) const { return states.data() + i * d; }

    std::uint64_t key(const std::int32_t* k) const {
        std::uint64_t key = 0;
        const std::uint64_t base = 2 * static_cast<std::uint64_t>(n_R) + 1;
        for (std::size_t j = 0; j < d; ++j) key = key * base + static_cast<std::uint64_t>(k[j] + n_R);
        return key;
    }

    /// Index of the state with lattice indices k, if present.
    std::optional<std::size_t> find(const std::int32_t* k) const {
        for (std::size_t j = 0; j < d; ++j)
            if (k[j] < -n_R || k[j] > n_R) return std::nullopt;
        const std::uint64_t target = key(k);
        std::size_t lo = 0, hi = size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (key(state(mid)) < target) lo = mid + 1;
            else hi = mid;
        }
        if (lo < size() && key(state(lo)) == target) return lo;
        return std::nullopt;
    }

    double mass_at(const std::int32_t* k) const {
        const auto i = find(k);
        return i ? mass[*i] : 0.0;
    }
};

/// Axis interval of lattice cell k (closed, clipped to [−R, R]).
inline Interval cell_interval(int k, double h, double R) {
    return {std::max((k - 0.5) * h, -R), std::min((k + 0.5) * h, R)};
}

namespace detail {

// Integration by parts on one axis: ∫_{(lo,hi]} x^p ρ(dx) for p ∈ {1,2}
// where tail(u) = ρ((u,hi]) is finite and smooth on (lo, hi].
template <class Tail>
double moment_by_parts(int p, double lo, double hi, Tail&& tail, bool singular_at_lo, int panels) {
    auto integrand = [&](double u) { return p == 1 ? tail(u) : 2.0 * u * tail(u); };
    double boundary = 0.0;
    if (lo > 0.0) boundary = (p == 1 ? lo : lo * lo) * tail(lo);
    double body;
    if (singular_at_lo) {
        body = quadrature::integrate_graded([&](double t) { return integrand(lo + t); }, hi - lo, panels, 8);
        const double delta = (hi - lo) * std::ldexp(1.0, -panels);
        body += quadrature::gauss_legendre([&](double t) { return integrand(lo + t); }, 0.0, delta, 8);
    } else {
        body = quadrature::integrate(integrand, lo, hi, 1e-15, 1e-11);
    }
    return boundary + body;
}

inline int auto_panels(const GridSpec& g, double beta) {
    if (g.subcells_K > 0) return g.subcells_K;
    return std::min(120, static_cast<int>(std::ceil(40.0 / std::max(0.1, 2.0 - beta))));
}

// Boxes of the other axes covering [lo,hi]^{d−1} \ [−c,c]^{d−1}, as a list
// of (d−1)-tuples of intervals, each bounded away from 0 on some axis.
inline std::vector<std::vector<Interval>> off_center_boxes(std::size_t n, double c, double lo, double hi) {
    std::vector<std::vector<Interval>> out;
    const Interval parts[3] = {{lo, -c}, {-c, c}, {c, hi}};
    std::vector<int> idx(n, 0);
    for (;;) {
        bool all_center = true;
        std::vector<Interval> b(n);
        for (std::size_t k = 0; k < n; ++k) {
            b[k] = parts[idx[k]];
            all_center = all_center && idx[k] == 1;
        }
        bool empty = false;
        for (auto& iv : b) empty = empty || !(iv.lo < iv.hi);
        if (!all_center && !empty) out.push_back(std::move(b));
        std::size_t k = 0;
        while (k < n && ++idx[k] == 3) idx[k++] = 0;
        if (k == n) break;
    }
    return out;
}

inline Matrix psd_sqrt(const Matrix& C, const char* what) {
    const Matrix S = 0.5 * (C + C.transpose());
    if (S.rows() == 0) return S;
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    Vector ev = es.eigenvalues();
    const double norm = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-10 * norm) throw std::runtime_error(std::string(what) + " is not positive semidefinite");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

/// C^h_ij = ∫_{A^h_0 ∩ [−V,V]^d} x_i x_j λ(dx); `residual` receives a quadrature error estimate.
inline Matrix small_jump_cov(const JumpMeasure& measure, const GridSpec& grid, double* residual = nullptr) {
    validate(grid, measure);
    const std::size_t d = measure.dim();
    Matrix C = Matrix::Zero(d, d);
    if (residual) *residual = 0.0;
    const double a = std::min({0.5 * grid.h, grid.V, measure.truncation()});
    if (!(a > 0.0)) return C;
    if (d == 1) {
        C(0, 0) = measure.margin(0).moment(2, -a, a);
        return C;
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    const CopulaMeasure cm = measure.copula_measure()->truncated(inf);
    const int panels = detail::auto_panels(grid, measure.bg_index());

    // Diagonal: margin moment minus the part where some other coordinate leaves [−a, a].
    for (std::size_t i = 0; i < d; ++i) {
        double v = measure.margin(i).moment(2, -a, a);
        for (const auto& rest : detail::off_center_boxes(d - 1, a, -inf, inf)) {
            std::vector<Interval> box(d);
            auto fill = [&](Interval iv) {
                for (std::size_t k = 0, r = 0; k < d; ++k) box[k] = (k == i) ? iv : rest[r++];
            };
            auto up = [&](double u) { fill({u, a}); return cm.rectangle_mass(box); };
            auto dn = [&](double u) { fill({-a, -u}); return cm.rectangle_mass(box); };
            v -= detail::moment_by_parts(2, 0.0, a, up, false, panels);
            v -= detail::moment_by_parts(2, 0.0, a, dn, false, panels);
        }
        C(i, i) = v;
    }

    // Off-diagonal: ∫∫ ν(|x_i| ∈ (u,a], |x_j| ∈ (v,a], quadrant, rest ∈ [−a,a]) du dv.
    auto offdiag = [&](std::size_t i, std::size_t j, int n) {
        quadrature::Rule r = quadrature::graded_rule(a, panels, n);
        const double delta = a * std::ldexp(1.0, -panels);
        const auto& last = quadrature::legendre_rule(n);
        for (int q = 0; q < n; ++q) {
            r.nodes.push_back(0.5 * delta * (1.0 + last.nodes[q]));
            r.weights.push_back(0.5 * delta * last.weights[q]);
        }
        std::vector<AxisTerms> base(d);
        for (std::size_t k = 0; k < d; ++k) base[k] = cm.axis_terms(k, {-a, a});
        double total = 0.0;
        for (int si : {1, -1}) {
            for (int sj : {1, -1}) {
                std::vector<AxisTerms> ti(r.nodes.size()), tj(r.nodes.size());
                for (std::size_t p = 0; p < r.nodes.size(); ++p) {
                    const double u = r.nodes[p];
                    ti[p] = cm.axis_terms(i, si > 0 ? Interval{u, a} : Interval{-a, -u});
                    tj[p] = cm.axis_terms(j, sj > 0 ? Interval{u, a} : Interval{-a, -u});
                }
                double s = 0.0;
                std::vector<AxisTerms> axes = base;
                for (std::size_t p = 0; p < r.nodes.size(); ++p) {
                    axes[i] = ti[p];
                    double inner = 0.0;
                    for (std::size_t qn = 0; qn < r.nodes.size(); ++qn) {
                        axes[j] = tj[qn];
                        inner += r.weights[qn] * cm.mass_from_terms(axes).mass;
                    }
                    s += r.weights[p] * inner;
                }
                total += si * sj * s;
            }
        }
        return total;
    };
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double v = offdiag(i, j, 6);
            C(i, j) = C(j, i) = v;
            if (residual) *residual = std::max(*residual, std::fabs(v - offdiag(i, j, 3)));
        }
    }
    return C;
}

/// μ̃_j = ∫_{[−R,R]^d \ [−V,V]^d} y_j λ(dy).
inline Vector drift_mu_tilde(const JumpMeasure& measure, const GridSpec& grid) {
    validate(grid, measure);
    const std::size_t d = measure.dim();
    Vector mt = Vector::Zero(d);
    const double R = std::min(grid.R_aligned(), measure.truncation());
    const double V = grid.V;
    if (R <= V) return mt;
    if (d == 1) {
        const auto& m = measure.margin(0);
        mt(0) = m.moment(1, V, R) + m.moment(1, -R, -V);
        return mt;
    }
    const CopulaMeasure cm = measure.copula_measure()->truncated(R);
    const int panels = detail::auto_panels(grid, measure.bg_index());
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<Interval> box(d, Interval{-R, R});
        auto mass_with = [&](Interval iv) {
            box[j] = iv;
            return cm.rectangle_mass(box);
        };
        // |y_j| > V, other coordinates anywhere in [−R, R].
        const bool singular = V == 0.0;
        double v = detail::moment_by_parts(1, V, R, [&](double u) { return mass_with({u, R}); }, singular, panels);
        v -= detail::moment_by_parts(1, V, R, [&](double u) { return mass_with({-R, -u}); }, singular, panels);
        // |y_j| ≤ V while some other coordinate leaves [−V, V].
        if (V > 0.0) {
            for (const auto& rest : detail::off_center_boxes(d - 1, V, -R, R)) {
                auto fill = [&](Interval iv) {
                    for (std::size_t k = 0, r = 0; k < d; ++k) box[k] = (k == j) ? iv : rest[r++];
                    return cm.rectangle_mass(box);
                };
                v += detail::moment_by_parts(1, 0.0, V, [&](double u) { return fill({u, V}); }, false, panels);
                v -= detail::moment_by_parts(1, 0.0, V, [&](double u) { return fill({-V, -u}); }, false, panels);
            }
        }
        mt(j) = v;
    }
    return mt;
}

/// μ^{h(λ)} by the marginal simplification: coordinate j sums over the 1D lattice.
inline Vector mu_h_lambda_marginal(const JumpMeasure& measure, const GridSpec& grid) {
    const std::size_t d = measure.dim();
    const int n = grid.n_R();
    const double R = grid.R_aligned();
    const JumpMeasure m = measure.truncated(R);
    Vector mu = Vector::Zero(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = -n; k <= n; ++k) {
            if (k == 0) continue;
            s += (k * grid.h) * m.marginal_mass(j, cell_interval(k, grid.h, R));
        }
        mu(j) = s;
    }
    return mu;
}

/// μ^{h(λ)} summed over the full table.
inline Vector mu_h_lambda_exact(const JumpTable& t) {
    Vector mu = Vector::Zero(t.d);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.d; ++j) mu(j) += t.coord(i, j) * t.mass[i];
    return mu;
}

inline Vector mu_h_lambda(const JumpTable& t, const JumpMeasure& measure, const GridSpec& grid) {
    if (t.d == 1) return mu_h_lambda_exact(t);
    return mu_h_lambda_marginal(measure, grid);
}

inline JumpTable build_jump_table(const JumpMeasure& measure, const GridSpec& grid) {
    validate(grid, measure);
    const std::size_t d = grid.d;
    const int n = grid.n_R();
    const double h = grid.h;
    const double R = grid.R_aligned();
    const double side = 2.0 * n + 1.0;
    const double candidates = std::pow(side, static_cast<double>(d)) - 1.0;
    if (candidates > static_cast<double>(grid.state_cap)) {
        std::ostringstream os;
        const double h_min = 2.0 * R / (std::pow(static_cast<double>(grid.state_cap), 1.0 / d) - 1.0);
        const double R_max = 0.5 * h * (std::pow(static_cast<double>(grid.state_cap), 1.0 / d) - 1.0);
        os << "lattice has " << candidates << " candidate states, above the cap " << grid.state_cap
           << "; use h >= " << h_min << " or R <= " << R_max;
        throw SizingError(os.str());
    }
    const JumpMeasure m = measure.truncated(R);

    JumpTable t;
    t.h = h;
    t.R = R;
    t.n_R = n;
    t.d = d;
    t.V = grid.V;

    std::vector<std::int32_t> states;
    std::vector<double> masses;
    if (d == 1) {
        for (int k = -n; k <= n; ++k) {
            if (k == 0) continue;
            const Interval iv = cell_interval(k, h, R);
            const double w = m.margin(0).interval_mass(iv.lo, iv.hi);
            if (w > 0.0) {
                states.push_back(k);
                masses.push_back(w);
            }
        }
    } else {
        const CopulaMeasure& cm = *m.copula_measure();
        std::vector<std::vector<AxisTerms>> terms(d);
        for (std::size_t j = 0; j < d; ++j)
            for (int k = -n; k <= n; ++k) terms[j].push_back(cm.axis_terms(j, cell_interval(k, h, R)));
        std::vector<int> idx(d, 0);
        std::vector<AxisTerms> axes(d);
        std::size_t clamped = 0;
        for (;;) {
            bool origin = true;
            for (std::size_t j = 0; j < d; ++j) origin = origin && idx[j] == n;
            if (!origin) {
                for (std::size_t j = 0; j < d; ++j) axes[j] = terms[j][idx[j]];
                const BoxMass bm = cm.mass_from_terms(axes);
                clamped += bm.clamped ? 1 : 0;
                if (bm.mass > 0.0) {
                    for (std::size_t j = 0; j < d; ++j) states.push_back(idx[j] - n);
                    masses.push_back(bm.mass);
                }
            }
            // Last axis fastest keeps the states in key order.
            std::size_t j = d;
            while (j > 0 && ++idx[j - 1] == 2 * n + 1) idx[--j] = 0;
            if (j == 0) break;
        }
        t.clamped_cells = clamped;
        double raw_total = 0.0;
        for (double w : masses) raw_total += w;
        const double floor = 1e-16 * raw_total;
        std::vector<std::int32_t> kept_states;
        std::vector<double> kept;
        for (std::size_t i = 0; i < masses.size(); ++i) {
            if (masses[i] < floor) {
                t.dropped_mass += masses[i];
                continue;
            }
            kept.push_back(masses[i]);
            kept_states.insert(kept_states.end(), states.begin() + i * d, states.begin() + (i + 1) * d);
        }
        states.swap(kept_states);
        masses.swap(kept);
    }
    if (masses.empty()) throw std::runtime_error("jump table is empty");
    t.states = std::move(states);
    t.mass = std::move(masses);
    for (double w : t.mass) t.total_rate += w;
    t.sampler = DiscreteSampler(t.mass, grid.sampler);

    t.C_h = small_jump_cov(measure, grid, &t.cov_residual);
    t.c_h = detail::psd_sqrt(t.C_h, "small-jump covariance");
    t.mu_tilde = drift_mu_tilde(measure, grid);
    t.mu_h_lambda = mu_h_lambda(t, measure, grid);
    return t;
}

/// Smallest lattice-aligned R capturing `ratio` of the mass outside A^h_0 on every axis.
inline double choose_truncation_by_mass(const JumpMeasure& measure, double h, double ratio = 0.99999) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("mass ratio must lie in (0,1)");
    if (!(h > 0.0)) throw ConfigError("h must be positive");
    const double R0 = measure.truncation();
    int best = 1;
    for (std::size_t j = 0; j < measure.dim(); ++j) {
        const auto& m = measure.margin(j);
        auto outside = [&](double x) {
            if (x >= R0) return 0.0;
            return m.interval_mass(x, R0) + m.interval_mass(-R0, -x);
        };
        const double den = outside(0.5 * h);
        if (den == 0.0) continue;
        auto ok = [&](int n) { return outside(n * h) <= (1.0 - ratio) * den; };
        int hi = 1;
        while (!ok(hi)) {
            if (hi > (1 << 29)) throw ConfigError("truncation search diverged");
            hi *= 2;
        }
        int lo = hi / 2;
        while (hi - lo > 1) {
            const int mid = lo + (hi - lo) / 2;
            if (ok(mid)) hi = mid;
            else lo = mid;
        }
        best = std::max(best, hi);
    }
    return best * h;
}

struct SchemeParams {
    double h;
    double R;
    std::uint64_t n;
};

struct ErrorConstants {
    double D_V;
    double D_B;
    double D_T;
};

inline SchemeParams params_from_eps(double eps, const ErrorConstants& c, double beta) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (!(beta >= 0.0 && beta < 2.0)) throw ConfigError("beta must lie in [0,2)");
    if (!(c.D_V > 0.0 && c.D_B > 0.0 && c.D_T > 0.0)) throw ConfigError("error constants must be positive");
    SchemeParams p;
    p.h = std::pow(3.0 * c.D_B, -1.0 / (2.0 - beta)) * std::pow(eps, 2.0 / (2.0 - beta));
    p.R = std::sqrt(3.0 * c.D_T) / eps;
    const double n = 3.0 * c.D_V / (eps * eps);
    p.n = static_cast<std::uint64_t>(std::ceil(n * (1.0 - 1e-12)));
    return p;
}

}  // namespace levymlmc
