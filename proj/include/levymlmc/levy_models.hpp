#pragma once

// One-dimensional Lévy measures.
//
// Each catalog model is a pair of tempered power-law legs,
//   density(x) = C · |x|^{−1−Y} · e^{−M|x|}   on one side of 0,
// which covers CGMY (Y = y), Variance-Gamma (Y = 0) and the double-exponential
// jump model (Y = −1, C = rate·decay). Every mass and moment reduces to an
// incomplete-gamma integral in M·|x|.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "levymlmc/special_functions.hpp"

namespace levymlmc {

enum class ModelKind { HEM, VG, CGMY };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::HEM: return "hem";
        case ModelKind::VG: return "vg";
        case ModelKind::CGMY: return "cgmy";
    }
    return "?";
}

struct HemParams {
    double intensity;  // jumps per year
    double p_up;
    double eta_up;
    double eta_down;
    double sigma;      // diffusion volatility carried with the margin
};

struct VgParams {
    double sigma;
    double nu;
    double theta;
};

struct CgmyParams {
    double c;
    double g;
    double m;
    double y;
};

/// C |x|^{−1−Y} e^{−M|x|} restricted to one side of the origin.
struct PowerLeg {
    double C = 0.0;
    double M = 1.0;
    double Y = 0.0;

    double density(double ax) const { return C * std::exp(-(1.0 + Y) * std::log(ax) - M * ax); }

    /// ∫_{a}^{b} x^k density(x) dx for 0 ≤ a ≤ b ≤ ∞.
    double moment(int k, double a, double b) const {
        if (C == 0.0 || a >= b) return 0.0;
        const double s = k - Y;
        return C * std::pow(M, Y - k) * special::gamma_interval(s, M * a, M * b);
    }
};

class LevyModel1D {
  public:
    static LevyModel1D hem(const HemParams& p) {
        if (!(p.intensity >= 0.0) || !(p.p_up >= 0.0 && p.p_up <= 1.0) || !(p.eta_up > 0.0) ||
            !(p.eta_down > 0.0) || !(p.sigma >= 0.0))
            throw std::invalid_argument("hem: invalid parameters");
        LevyModel1D m(ModelKind::HEM);
        m.pos_ = {p.intensity * p.p_up * p.eta_up, p.eta_up, -1.0};
        m.neg_ = {p.intensity * (1.0 - p.p_up) * p.eta_down, p.eta_down, -1.0};
        m.sigma_ = p.sigma;
        m.hem_ = p;
        return m;
    }

    static LevyModel1D vg(const VgParams& p) {
        if (!(p.sigma > 0.0) || !(p.nu > 0.0) || !std::isfinite(p.theta))
            throw std::invalid_argument("vg: invalid parameters");
        const double root = std::sqrt(p.theta * p.theta * p.nu * p.nu / 4.0 + p.sigma * p.sigma * p.nu / 2.0);
        const double C = 1.0 / p.nu;
        LevyModel1D m(ModelKind::VG);
        m.pos_ = {C, 1.0 / (root + p.theta * p.nu / 2.0), 0.0};
        m.neg_ = {C, 1.0 / (root - p.theta * p.nu / 2.0), 0.0};
        m.vg_ = p;
        return m;
    }

    static LevyModel1D cgmy(const CgmyParams& p) {
        if (!(p.c > 0.0) || !(p.g > 0.0) || !(p.m > 0.0) || !(p.y > 0.0 && p.y < 2.0))
            throw std::invalid_argument("cgmy: invalid parameters");
        LevyModel1D m(ModelKind::CGMY);
        m.pos_ = {p.c, p.m, p.y};
        m.neg_ = {p.c, p.g, p.y};
        m.cgmy_ = p;
        return m;
    }

    ModelKind kind() const { return kind_; }
    const PowerLeg& positive_leg() const { return pos_; }
    const PowerLeg& negative_leg() const { return neg_; }
    const HemParams& hem_params() const { return hem_; }
    const VgParams& vg_params() const { return vg_; }
    const CgmyParams& cgmy_params() const { return cgmy_; }

    /// Diffusion volatility housed with the margin (HEM only, 0 otherwise).
    double diffusion_sigma() const { return sigma_; }

    double density(double x) const {
        if (x == 0.0) throw std::domain_error("density: x = 0");
        return x > 0.0 ? pos_.density(x) : neg_.density(-x);
    }

    /// sign(x)·λ(I(x)) with I(x) = (x,∞) for x > 0 and (−∞,x] for x < 0.
    double tail_integral(double x) const {
        if (x == 0.0 || std::isnan(x)) throw std::domain_error("tail_integral: x = 0");
        if (x > 0.0) return pos_.moment(0, x, inf());
        return -neg_.moment(0, -x, inf());
    }

    /// Limit of the tail integral at 0± (infinite for infinite activity).
    double tail_at_zero(bool positive) const {
        const PowerLeg& leg = positive ? pos_ : neg_;
        if (leg.C == 0.0) return 0.0;
        const double v = leg.Y < 0.0 ? leg.moment(0, 0.0, inf()) : inf();
        return positive ? v : -v;
    }

    /// λ([a,b]) for an interval on one side of 0 (endpoints may be ±∞).
    double interval_mass(double a, double b) const {
        if (a == b) return 0.0;
        if (!(a < b)) throw std::domain_error("interval_mass: a > b");
        if (a < 0.0 && b > 0.0) throw std::domain_error("interval_mass: interval straddles 0");
        if (a >= 0.0) {
            if (a == 0.0 && pos_.Y >= 0.0 && pos_.C > 0.0) return inf();
            return pos_.moment(0, a, b);
        }
        if (b == 0.0 && neg_.Y >= 0.0 && neg_.C > 0.0) return inf();
        return neg_.moment(0, -b, -a);
    }

    /// ∫_{[a,b]} x^k λ(dx) for k ∈ {1,2} on one side of 0.
    double moment(int k, double a, double b) const {
        if (a >= b) return 0.0;
        if (a < 0.0 && b > 0.0) return moment(k, a, 0.0) + moment(k, 0.0, b);
        if (a >= 0.0) return pos_.moment(k, a, b);
        const double v = neg_.moment(k, -b, -a);
        return (k % 2 == 1) ? -v : v;
    }

    /// ∫_{[−h/2,h/2]} x² λ(dx).
    double truncated_second_moment(double h) const {
        if (!(h > 0.0)) throw std::domain_error("truncated_second_moment: h <= 0");
        return pos_.moment(2, 0.0, 0.5 * h) + neg_.moment(2, 0.0, 0.5 * h);
    }

    double bg_index() const { return std::max(0.0, std::max(pos_.Y, neg_.Y)); }
    bool finite_activity() const { return pos_.Y < 0.0 && neg_.Y < 0.0; }
    bool finite_variation() const { return pos_.Y < 1.0 && neg_.Y < 1.0; }

    /// Exponential decay rate of the tail on the given side.
    double decay_rate(bool positive) const { return positive ? pos_.M : neg_.M; }

    std::string describe() const {
        switch (kind_) {
            case ModelKind::HEM:
                return "hem(intensity=" + std::to_string(hem_.intensity) + ", p=" + std::to_string(hem_.p_up) +
                       ", eta_up=" + std::to_string(hem_.eta_up) + ", eta_down=" + std::to_string(hem_.eta_down) +
                       ", sigma=" + std::to_string(hem_.sigma) + ")";
            case ModelKind::VG:
                return "vg(sigma=" + std::to_string(vg_.sigma) + ", nu=" + std::to_string(vg_.nu) +
                       ", theta=" + std::to_string(vg_.theta) + ")";
            case ModelKind::CGMY:
                return "cgmy(c=" + std::to_string(cgmy_.c) + ", g=" + std::to_string(cgmy_.g) +
                       ", m=" + std::to_string(cgmy_.m) + ", y=" + std::to_string(cgmy_.y) + ")";
        }
        return {};
    }

  private:
    explicit LevyModel1D(ModelKind k) : kind_(k) {}
    static constexpr double inf() { return std::numeric_limits<double>::infinity(); }

    ModelKind kind_;
    PowerLeg pos_;
    PowerLeg neg_;
    double sigma_ = 0.0;
    HemParams hem_{};
    VgParams vg_{};
    CgmyParams cgmy_{};
};

inline double tail_integral(const LevyModel1D& m, double x) { return m.tail_integral(x); }
inline double interval_mass(const LevyModel1D& m, double a, double b) { return m.interval_mass(a, b); }
inline double truncated_second_moment(const LevyModel1D& m, double h) { return m.truncated_second_moment(h); }
inline double bg_index(const LevyModel1D& m) { return m.bg_index(); }

/// A catalog model restricted to [−R, R].
class TruncatedMeasure1D {
  public:
    TruncatedMeasure1D(LevyModel1D base, double cutoff) : base_(std::move(base)), R_(cutoff) {
        if (!(cutoff > 0.0)) throw std::invalid_argument("truncation radius must be positive");
    }

    const LevyModel1D& base() const { return base_; }
    double cutoff() const { return R_; }

    double tail_integral(double x) const {
        if (x == 0.0) throw std::domain_error("tail_integral: x = 0");
        if (std::fabs(x) >= R_) return 0.0;
        return x > 0.0 ? base_.interval_mass(x, R_) : -base_.interval_mass(-R_, x);
    }

    double interval_mass(double a, double b) const {
        if (a == b) return 0.0;
        if (!(a < b)) throw std::domain_error("interval_mass: a > b");
        if (a < 0.0 && b > 0.0) throw std::domain_error("interval_mass: interval straddles 0");
        a = std::max(a, -R_);
        b = std::min(b, R_);
        if (a >= b) return 0.0;
        return base_.interval_mass(a, b);
    }

    double truncated_second_moment(double h) const {
        if (!(h > 0.0)) throw std::domain_error("truncated_second_moment: h <= 0");
        const double c = std::min(0.5 * h, R_);
        return base_.moment(2, -c, c);
    }

    double bg_index() const { return base_.bg_index(); }

  private:
    LevyModel1D base_;
    double R_;
};

}  // namespace levymlmc
