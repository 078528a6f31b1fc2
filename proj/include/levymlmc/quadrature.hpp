#pragma once

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace levymlmc::quadrature {

struct Rule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss–Legendre rule, computed once per n by Newton iteration.
inline const Rule& legendre_rule(int n) {
    static std::mutex mu;
    static std::map<int, Rule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return cache.emplace(n, std::move(r)).first->second;
}

template <class F>
double gauss_legendre(F&& f, double a, double b, int n = 20) {
    const Rule& r = legendre_rule(n);
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += r.weights[i] * f(c + hw * r.nodes[i]);
    return s * hw;
}

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<double, double> gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    const double fc = f(c);
    double k = fc * kWgk[7];
    double g = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = hw * kXgk[j];
        const double f1 = f(c - dx), f2 = f(c + dx);
        k += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) g += kWg[j / 2] * (f1 + f2);
    }
    return {k * hw, std::fabs((k - g) * hw)};
}

template <class F>
double adaptive(F& f, double a, double b, double whole, double err, double abs_tol,
                double rel_tol, int depth) {
    if (err <= std::max(abs_tol, rel_tol * std::fabs(whole)) || depth <= 0) return whole;
    const double m = 0.5 * (a + b);
    auto [l, el] = gk15(f, a, m);
    auto [r, er] = gk15(f, m, b);
    return adaptive(f, a, m, l, el, 0.5 * abs_tol, rel_tol, depth - 1) +
           adaptive(f, m, b, r, er, 0.5 * abs_tol, rel_tol, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss–Kronrod (7/15) on a finite interval.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-12,
                 int max_depth = 40) {
    if (a == b) return 0.0;
    auto [v, e] = detail::gk15(f, a, b);
    return detail::adaptive(f, a, b, v, e, abs_tol, rel_tol, max_depth);
}

/// ∫_0^b f for integrands with an integrable singularity at 0: geometric
/// panels [b 2^{-k-1}, b 2^{-k}] down to b 2^{-panels}, each with n-point
/// Gauss–Legendre. The omitted innermost piece is the caller's responsibility.
template <class F>
double integrate_graded(F&& f, double b, int panels, int n = 10) {
    double s = 0.0;
    double hi = b;
    for (int k = 0; k < panels; ++k) {
        const double lo = 0.5 * hi;
        s += gauss_legendre(f, lo, hi, n);
        hi = lo;
    }
    return s;
}

/// Nodes and weights of the graded rule on (0, b], for tensor-product use.
inline Rule graded_rule(double b, int panels, int n = 10) {
    const Rule& r = legendre_rule(n);
    Rule out;
    double hi = b;
    for (int k = 0; k < panels; ++k) {
        const double lo = 0.5 * hi;
        const double c = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
        for (int i = 0; i < n; ++i) {
            out.nodes.push_back(c + hw * r.nodes[i]);
            out.weights.push_back(hw * r.weights[i]);
        }
        hi = lo;
    }
    return out;
}

}  // namespace levymlmc::quadrature
