#pragma once

// A Lévy measure on R^d that is either a single catalog model (d = 1) or a
// Clayton-copula measure (d ≥ 2), truncated to [−R, R]^d.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "levymlmc/levy_copula.hpp"
#include "levymlmc/levy_models.hpp"

namespace levymlmc {

class JumpMeasure {
  public:
    explicit JumpMeasure(LevyModel1D model, double truncation = std::numeric_limits<double>::infinity())
        : margins_{std::move(model)}, R_(truncation) {
        if (!(truncation > 0.0)) throw std::invalid_argument("truncation radius must be positive");
    }

    explicit JumpMeasure(CopulaMeasure cm)
        : margins_(cm.margins()), R_(cm.truncation()), copula_(std::move(cm)) {}

    std::size_t dim() const { return margins_.size(); }
    const LevyModel1D& margin(std::size_t j) const { return margins_.at(j); }
    const std::vector<LevyModel1D>& margins() const { return margins_; }
    const std::optional<CopulaMeasure>& copula_measure() const { return copula_; }
    double truncation() const { return R_; }

    JumpMeasure truncated(double R) const {
        if (copula_) return JumpMeasure(copula_->truncated(R));
        return JumpMeasure(margins_[0], std::min(R, R_));
    }

    double bg_index() const {
        double b = 0.0;
        for (const auto& m : margins_) b = std::max(b, m.bg_index());
        return b;
    }

    bool finite_variation() const {
        for (const auto& m : margins_)
            if (!m.finite_variation()) return false;
        return true;
    }

    /// Mass of a box (intervals clipped to the truncation).
    double box_mass(std::span<const Interval> box) const {
        if (box.size() != dim()) throw std::invalid_argument("box dimension mismatch");
        if (copula_) return copula_->rectangle_mass(box);
        double lo = std::max(box[0].lo, -R_), hi = std::min(box[0].hi, R_);
        if (!(lo < hi)) return 0.0;
        const auto& m = margins_[0];
        if (lo < 0.0 && hi > 0.0) return m.interval_mass(lo, 0.0) + m.interval_mass(0.0, hi);
        return m.interval_mass(lo, hi);
    }

    /// Mass of {x_j ∈ iv} within the truncated measure (other axes unrestricted on [−R,R]).
    double marginal_mass(std::size_t j, Interval iv) const {
        std::vector<Interval> box(dim(), Interval{-R_, R_});
        box[j] = iv;
        return box_mass(box);
    }

  private:
    std::vector<LevyModel1D> margins_;
    double R_;
    std::optional<CopulaMeasure> copula_;
};

}  // namespace levymlmc
