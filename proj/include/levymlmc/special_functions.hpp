#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "levymlmc/quadrature.hpp"

namespace levymlmc::special {

namespace detail {

// Modified Lentz evaluation of the continued fraction for Γ(a, z); valid for
// any real a once z is moderately large.
inline double upper_gamma_cf(double a, double z) {
    constexpr double tiny = 1e-300;
    double b = z + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-z + a * std::log(z)) * h;
}

}  // namespace detail

/// Upper incomplete gamma Γ(a, z) for real a (negative allowed) and z > 0.
inline double upper_gamma(double a, double z) {
    if (std::isinf(z)) return 0.0;
    if (!(z > 0.0)) {
        if (z == 0.0 && a > 0.0) return std::tgamma(a);
        throw std::domain_error("upper_gamma: z must be positive for a <= 0");
    }
    if (a > 0.0) return boost::math::tgamma(a, z);
    if (a == 0.0) return boost::math::expint(1, z);
    if (z >= 1.0) return detail::upper_gamma_cf(a, z);
    // Γ(a, z) = (Γ(a+1, z) − z^a e^{−z}) / a, stepping up to a nonnegative parameter.
    return (upper_gamma(a + 1.0, z) - std::exp(a * std::log(z) - z)) / a;
}

/// ∫_{z1}^{z2} t^{s−1} e^{−t} dt for 0 ≤ z1 ≤ z2 ≤ ∞ (z1 > 0 when s ≤ 0).
inline double gamma_interval(double s, double z1, double z2) {
    if (!(z1 <= z2)) throw std::domain_error("gamma_interval: z1 > z2");
    if (z1 == z2) return 0.0;
    // Short relative spans: direct Gauss–Legendre on the integrand avoids
    // cancelling two nearly equal incomplete gammas.
    if (z1 > 0.0 && std::isfinite(z2) && z2 <= 2.0 * z1) {
        return quadrature::gauss_legendre(
            [s](double t) { return std::exp((s - 1.0) * std::log(t) - t); }, z1, z2, 20);
    }
    if (s > 0.0) {
        if (z1 < s && std::isfinite(z2)) {
            const double lo = z1 > 0.0 ? boost::math::tgamma_lower(s, z1) : 0.0;
            return boost::math::tgamma_lower(s, z2) - lo;
        }
        return boost::math::tgamma(s, z1) - (std::isinf(z2) ? 0.0 : boost::math::tgamma(s, z2));
    }
    if (z1 == 0.0) return std::numeric_limits<double>::infinity();
    return upper_gamma(s, z1) - upper_gamma(s, z2);
}

}  // namespace levymlmc::special
