#pragma once

// Clayton Lévy copula and the d-dimensional Lévy measures it generates.
//
// A box mass is a signed sum of F(u_1, …, u_d) over per-axis "tail terms".
// On an axis interval [a,b] inside one orthant the terms are (U(a), +1) and
// (U(b), −1), where U is the signed tail integral. An interval with a < 0 < b
// is the whole line minus the two outer tails; the whole line is carried by
// the arguments u = ±∞, whose signed sum recovers the margin including any
// mass sitting on the axis x_j = 0 (finite-activity margins put mass there).
// An endpoint exactly at 0 is read as excluded.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "levymlmc/levy_models.hpp"

namespace levymlmc {

/// Closed interval [lo, hi]; either end may be infinite.
struct Interval {
    double lo;
    double hi;
};

class ClaytonCopula {
  public:
    ClaytonCopula(double theta, double eta, std::size_t dim) : theta_(theta), eta_(eta), d_(dim) {
        if (!(theta > 0.0)) throw std::invalid_argument("clayton: theta must be positive");
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("clayton: eta must lie in [0,1]");
        if (dim < 2) throw std::invalid_argument("clayton: dimension must be at least 2");
        scale_ = std::ldexp(1.0, 2 - static_cast<int>(dim));
    }

    double theta() const { return theta_; }
    double eta() const { return eta_; }
    std::size_t dim() const { return d_; }

    double operator()(std::span<const double> u) const {
        double s = 0.0;
        bool negative = false;
        for (double ui : u) {
            if (ui == 0.0) return 0.0;
            if (ui < 0.0) negative = !negative;
            if (std::isfinite(ui)) s += std::exp(-theta_ * std::log(std::fabs(ui)));
        }
        const double sign = negative ? -(1.0 - eta_) : eta_;
        if (s == 0.0) return sign == 0.0 ? 0.0 : sign * std::numeric_limits<double>::infinity();
        return scale_ * sign * std::exp(-std::log(s) / theta_);
    }

  private:
    double theta_;
    double eta_;
    std::size_t d_;
    double scale_;
};

inline double copula_eval(const ClaytonCopula& c, std::span<const double> u) { return c(u); }

struct TailTerm {
    double u;
    double coeff;
};

/// Up to four tail terms describing one axis of a box.
struct AxisTerms {
    std::array<TailTerm, 4> t{};
    int n = 0;
    bool crossing = false;

    void add(double u, double coeff) {
        if (u != 0.0) t[n++] = {u, coeff};
    }
};

struct BoxMass {
    double mass = 0.0;
    double scale = 0.0;  // largest |term| in the corner sum
    bool clamped = false;
};

/// Lévy measure from a Clayton copula and catalog margins, optionally truncated to [−R,R]^d.
class CopulaMeasure {
  public:
    CopulaMeasure(ClaytonCopula copula, std::vector<LevyModel1D> margins,
                  double truncation = std::numeric_limits<double>::infinity())
        : copula_(std::move(copula)), margins_(std::move(margins)), R_(truncation) {
        if (margins_.size() != copula_.dim())
            throw std::invalid_argument("copula dimension does not match the number of margins");
        if (!(truncation > 0.0)) throw std::invalid_argument("truncation radius must be positive");
    }

    std::size_t dim() const { return margins_.size(); }
    const ClaytonCopula& copula() const { return copula_; }
    const LevyModel1D& margin(std::size_t j) const { return margins_[j]; }
    const std::vector<LevyModel1D>& margins() const { return margins_; }
    double truncation() const { return R_; }

    CopulaMeasure truncated(double R) const { return CopulaMeasure(copula_, margins_, std::min(R, R_)); }

    /// Signed tail integral of margin j, extended by U(±∞) = 0.
    double signed_tail(std::size_t j, double x) const {
        if (std::isinf(x)) return 0.0;
        return margins_[j].tail_integral(x);
    }

    /// Tail terms of the interval `iv` on axis j after truncation.
    AxisTerms axis_terms(std::size_t j, Interval iv) const {
        AxisTerms at;
        const double lo = std::max(iv.lo, -R_), hi = std::min(iv.hi, R_);
        if (!(lo < hi)) return at;
        const auto& m = margins_[j];
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (lo >= 0.0) {
            at.add(lo == 0.0 ? m.tail_at_zero(true) : signed_tail(j, lo), 1.0);
            at.add(signed_tail(j, hi), -1.0);
        } else if (hi <= 0.0) {
            at.add(signed_tail(j, lo), 1.0);
            at.add(hi == 0.0 ? m.tail_at_zero(false) : signed_tail(j, hi), -1.0);
        } else {
            at.crossing = true;
            at.add(inf, 1.0);
            at.add(-inf, -1.0);
            at.add(signed_tail(j, hi), -1.0);
            at.add(signed_tail(j, lo), 1.0);
        }
        return at;
    }

    /// Corner sum over precomputed axis terms.
    BoxMass mass_from_terms(std::span<const AxisTerms> axes) const {
        const std::size_t d = axes.size();
        BoxMass out;
        bool all_crossing = true;
        for (const auto& a : axes) {
            if (a.n == 0) return out;
            all_crossing = all_crossing && a.crossing;
        }
        if (all_crossing) throw std::domain_error("box contains the origin: infinite mass");
        std::array<int, 16> idx{};
        std::array<double, 16> u{};
        double sum = 0.0, comp = 0.0;
        for (;;) {
            double coeff = 1.0;
            for (std::size_t j = 0; j < d; ++j) {
                const TailTerm& tt = axes[j].t[idx[j]];
                u[j] = tt.u;
                coeff *= tt.coeff;
            }
            const double term = coeff * copula_(std::span<const double>(u.data(), d));
            out.scale = std::max(out.scale, std::fabs(term));
            // Neumaier summation.
            const double t = sum + term;
            comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
            sum = t;
            std::size_t j = 0;
            while (j < d && ++idx[j] == axes[j].n) idx[j++] = 0;
            if (j == d) break;
        }
        sum += comp;
        if (!std::isfinite(sum)) throw std::domain_error("box mass is not finite");
        if (sum < 0.0) {
            if (sum < -1e-12 * out.scale) throw std::runtime_error("negative box mass beyond rounding slack");
            sum = 0.0;
            out.clamped = true;
        }
        out.mass = sum;
        return out;
    }

    BoxMass rectangle_mass_detail(std::span<const Interval> box) const {
        if (box.size() != dim()) throw std::invalid_argument("box dimension mismatch");
        if (dim() > 16) throw std::invalid_argument("dimension above 16 is not supported");
        std::array<AxisTerms, 16> axes;
        for (std::size_t j = 0; j < dim(); ++j) {
            if (box[j].lo > box[j].hi) throw std::invalid_argument("box interval with lo > hi");
            axes[j] = axis_terms(j, box[j]);
            if (axes[j].n == 0) return {};
        }
        return mass_from_terms(std::span<const AxisTerms>(axes.data(), dim()));
    }

    double rectangle_mass(std::span<const Interval> box) const { return rectangle_mass_detail(box).mass; }

    double bg_index() const {
        double b = 0.0;
        for (const auto& m : margins_) b = std::max(b, m.bg_index());
        return b;
    }

  private:
    ClaytonCopula copula_;
    std::vector<LevyModel1D> margins_;
    double R_;
};

inline double rectangle_mass(const CopulaMeasure& m, std::span<const Interval> box) { return m.rectangle_mass(box); }
inline double copula_bg_index(const CopulaMeasure& m) { return m.bg_index(); }

}  // namespace levymlmc
