#pragma once

// Level coupling of the chains on hZ^d and 2hZ^d: every fine jump s carries a
// mark m ∈ {−h,0,h}^d drawn from p(s,m) = λ(A^{2h}_{s+m} ∩ A^h_s)/λ(A^h_s),
// and the coarse chain jumps by s+m (nothing when s+m = 0).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "levymlmc/ctmc_grid.hpp"

namespace levymlmc {

struct MarkDistribution {
    std::size_t d = 1;
    std::vector<std::int8_t> marks;  // d per entry, units of h
    std::vector<double> prob;

    std::size_t size() const { return prob.size(); }
    const std::int8_t* mark(std::size_t e) const { return marks.data() + e * d; }
};

namespace detail {

// Axis piece of the fine cell k that maps to coarse displacement m ∈ {−1,0,1}.
inline Interval fine_piece(int k, int m, double h, double R) {
    Interval c = cell_interval(k, h, R);
    if (m != 0) {
        const double mid = std::clamp(k * h, -R, R);
        c = m < 0 ? Interval{c.lo, mid} : Interval{mid, c.hi};
    }
    if (c.hi < c.lo) c.hi = c.lo;  // outside [−R, R]
    return c;
}

// Per-axis tail terms of cell k (piece 0), its lower half (1) and upper half (2).
class PieceTerms {
  public:
    PieceTerms(const CopulaMeasure& cm, double h, int n) : n_(n), d_(cm.dim()) {
        const double R = n * h;
        terms_.resize(d_ * (2 * n + 1) * 3);
        for (std::size_t j = 0; j < d_; ++j)
            for (int k = -n; k <= n; ++k)
                for (int p = 0; p < 3; ++p)
                    terms_[index(j, k, p)] = cm.axis_terms(j, fine_piece(k, p == 0 ? 0 : (p == 1 ? -1 : 1), h, R));
    }

    const AxisTerms& get(std::size_t j, int k, int m) const { return terms_[index(j, k, m == 0 ? 0 : (m < 0 ? 1 : 2))]; }

  private:
    std::size_t index(std::size_t j, int k, int p) const {
        return (j * (2 * static_cast<std::size_t>(n_) + 1) + static_cast<std::size_t>(k + n_)) * 3 + p;
    }
    int n_;
    std::size_t d_;
    std::vector<AxisTerms> terms_;
};

// Enumerates the marks allowed for fine index k: 0 on even axes, ±1 on odd axes.
inline std::vector<std::int8_t> admissible_marks(const std::int32_t* k, std::size_t d) {
    std::vector<std::size_t> odd;
    for (std::size_t j = 0; j < d; ++j)
        if (k[j] % 2 != 0) odd.push_back(j);
    const std::size_t n = std::size_t{1} << odd.size();
    std::vector<std::int8_t> out(n * d, 0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t q = 0; q < odd.size(); ++q) out[b * d + odd[q]] = (b >> q) & 1 ? 1 : -1;
    return out;
}

}  // namespace detail

/// Mark distribution p(s,·) of fine lattice index k, computed from the measure.
inline MarkDistribution mark_distribution(const JumpTable& fine, const JumpMeasure& measure, const std::int32_t* k) {
    const std::size_t d = fine.d;
    MarkDistribution md;
    md.d = d;
    const double cell = fine.mass_at(k);
    if (!(cell > 0.0)) {
        md.marks.assign(d, 0);
        md.prob = {1.0};
        return md;
    }
    const JumpMeasure m = measure.truncated(fine.R);
    md.marks = detail::admissible_marks(k, d);
    const std::size_t n = md.marks.size() / d;
    std::vector<double> piece(n);
    std::vector<Interval> box(d);
    double total = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
        for (std::size_t j = 0; j < d; ++j) box[j] = detail::fine_piece(k[j], md.marks[e * d + j], fine.h, fine.R);
        piece[e] = std::max(0.0, m.box_mass(box));
        total += piece[e];
    }
    md.prob.resize(n);
    double acc = 0.0;
    for (std::size_t e = 0; e + 1 < n; ++e) {
        md.prob[e] = piece[e] / total;
        acc += md.prob[e];
    }
    md.prob[n - 1] = std::max(0.0, 1.0 - acc);
    return md;
}

/// Mark distributions of every fine state, stored flat for sampling.
struct MarkTable {
    double h = 0.0;
    std::size_t d = 1;
    std::vector<std::uint32_t> offset;  // entries of state i are [offset[i], offset[i+1])
    std::vector<double> cdf;
    std::vector<std::int8_t> marks;
    std::vector<std::uint8_t> pruned;
    double max_normalization_error = 0.0;  // max |Σ pieces − mass(s)| / mass(s)

    std::size_t entries(std::size_t i) const { return offset[i + 1] - offset[i]; }
    const std::int8_t* mark(std::size_t e) const { return marks.data() + e * d; }

    double prob(std::size_t e, std::size_t i) const {
        const double prev = e == offset[i] ? 0.0 : cdf[e - 1];
        return cdf[e] - prev;
    }

    /// Entry index drawn for fine state i by inverse CDF.
    std::size_t sample(std::size_t i, Rng& rng, OpCounter* ops = nullptr) const {
        const std::uint32_t a = offset[i], b = offset[i + 1];
        if (b - a == 1) return a;
        const double u = rng.uniform();
        std::uint32_t e = a;
        std::uint64_t c = 0;
        while (e + 1 < b) {
            ++c;
            if (u < cdf[e]) break;
            ++e;
        }
        if (ops) ops->coupling += c;
        return e;
    }
};

inline MarkTable build_mark_table(const JumpTable& fine, const JumpMeasure& measure) {
    MarkTable mt;
    mt.h = fine.h;
    mt.d = fine.d;
    const std::size_t d = fine.d;
    if (fine.n_R % 2 != 0) throw ConfigError("coupling: R must be a multiple of the coarse step 2h");
    const JumpMeasure m = measure.truncated(fine.R);
    std::optional<detail::PieceTerms> terms;
    if (d > 1) terms.emplace(*m.copula_measure(), fine.h, fine.n_R);
    mt.offset.reserve(fine.size() + 1);
    mt.offset.push_back(0);
    std::vector<AxisTerms> axes(d);
    std::vector<double> piece;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const std::int32_t* k = fine.state(i);
        const auto marks = detail::admissible_marks(k, d);
        const std::size_t n = marks.size() / d;
        piece.assign(n, 0.0);
        double total = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            if (d == 1) {
                const Interval iv = detail::fine_piece(k[0], marks[e], fine.h, fine.R);
                piece[e] = m.margin(0).interval_mass(iv.lo, iv.hi);
            } else {
                for (std::size_t j = 0; j < d; ++j) axes[j] = terms->get(j, k[j], marks[e * d + j]);
                piece[e] = m.copula_measure()->mass_from_terms(axes).mass;
            }
            total += piece[e];
        }
        if (!(total > 0.0)) throw std::runtime_error("coupling: fine state with zero piece mass");
        mt.max_normalization_error =
            std::max(mt.max_normalization_error, std::fabs(total - fine.mass[i]) / fine.mass[i]);
        double acc = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            acc = e + 1 < n ? acc + piece[e] / total : 1.0;
            mt.cdf.push_back(acc);
            bool zero = true;
            for (std::size_t j = 0; j < d; ++j) {
                mt.marks.push_back(marks[e * d + j]);
                zero = zero && k[j] + marks[e * d + j] == 0;
            }
            mt.pruned.push_back(zero ? 1 : 0);
        }
        mt.offset.push_back(static_cast<std::uint32_t>(mt.cdf.size()));
    }
    return mt;
}

struct CoupledJump {
    bool pruned;
    std::size_t entry;
};

/// Draws the mark of fine state i; the coarse jump is k + mark in units of h.
inline CoupledJump sample_coupled_jump(const MarkTable& mt, std::size_t i, Rng& rng, OpCounter* ops = nullptr) {
    const std::size_t e = mt.sample(i, rng, ops);
    return {mt.pruned[e] != 0, e};
}

struct RateIdentityCell {
    std::vector<std::int32_t> z;  // coarse lattice index
    double pieces = 0.0;          // Σ_m λ(A^{2h}_z ∩ A^h_{z−m})
    double coarse = 0.0;          // mass_{2h}(z)
    double induced = 0.0;         // Σ_s mass_h(s) p(s, z−s)
    double rel_error = 0.0;
    bool ok = false;
};

struct RateIdentityReport {
    std::vector<RateIdentityCell> cells;
    double max_rel_error = 0.0;          // pieces against the coarse table
    double max_induced_rel_error = 0.0;  // sampled-mark intensity against the coarse table
    double pruned_rate = 0.0;
    double induced_total = 0.0;
    double coarse_total = 0.0;
    std::size_t failed_cells = 0;
    bool passed = false;
};

/// Checks Σ_m λ(A^{2h}_z ∩ A^h_{z−m}) = λ(A^{2h}_z) on every coarse state.
inline RateIdentityReport verify_rate_identity(const JumpTable& fine, const JumpTable& coarse,
                                               const JumpMeasure& measure, const MarkTable& mt, double tol = 1e-10) {
    if (fine.d != coarse.d) throw ConfigError("coupling: dimension mismatch");
    if (2.0 * fine.h != coarse.h || fine.R != coarse.R) throw ConfigError("coupling: lattices are not nested");
    if (mt.h != fine.h || mt.offset.size() != fine.size() + 1) throw ConfigError("coupling: mark table mismatch");
    const std::size_t d = fine.d;
    const JumpMeasure m = measure.truncated(fine.R);

    std::map<std::uint64_t, double> induced;
    RateIdentityReport rep;
    std::vector<std::int32_t> zc(d);
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const std::int32_t* k = fine.state(i);
        for (std::uint32_t e = mt.offset[i]; e < mt.offset[i + 1]; ++e) {
            const double rate = fine.mass[i] * mt.prob(e, i);
            if (mt.pruned[e]) {
                rep.pruned_rate += rate;
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) zc[j] = (k[j] + mt.mark(e)[j]) / 2;
            induced[coarse.key(zc.data())] += rate;
        }
    }

    std::vector<Interval> box(d);
    std::vector<int> idx(d);
    for (std::size_t c = 0; c < coarse.size(); ++c) {
        const std::int32_t* z = coarse.state(c);
        RateIdentityCell cell;
        cell.z.assign(z, z + d);
        cell.coarse = coarse.mass[c];
        double scale = 0.0, comp = 0.0;
        std::fill(idx.begin(), idx.end(), -1);
        for (;;) {
            // Piece −1 is the upper half of fine cell 2z−1 (mark +h), +1 the lower half of 2z+1.
            for (std::size_t j = 0; j < d; ++j) {
                const int kf = 2 * z[j] + idx[j];
                box[j] = detail::fine_piece(kf, -idx[j], fine.h, fine.R);
            }
            double w;
            if (d == 1) {
                w = m.margin(0).interval_mass(box[0].lo, box[0].hi);
                scale = std::max(scale, w);
            } else {
                const BoxMass bm = m.copula_measure()->rectangle_mass_detail(box);
                w = bm.mass;
                scale = std::max(scale, bm.scale);
            }
            const double t = cell.pieces + w;
            comp += std::fabs(cell.pieces) >= std::fabs(w) ? (cell.pieces - t) + w : (w - t) + cell.pieces;
            cell.pieces = t;
            std::size_t j = 0;
            while (j < d && ++idx[j] == 2) idx[j++] = -1;
            if (j == d) break;
        }
        cell.pieces += comp;
        const auto it = induced.find(coarse.key(z));
        cell.induced = it == induced.end() ? 0.0 : it->second;
        const double err = std::fabs(cell.pieces - cell.coarse);
        cell.rel_error = err / cell.coarse;
        // Corner sums of far-tail cells lose digits relative to the largest corner term.
        cell.ok = err <= tol * cell.coarse || err <= 1e-15 * scale;
        rep.max_rel_error = std::max(rep.max_rel_error, cell.rel_error);
        rep.failed_cells += cell.ok ? 0 : 1;
        rep.max_induced_rel_error =
            std::max(rep.max_induced_rel_error, std::fabs(cell.induced - cell.coarse) / cell.coarse);
        rep.induced_total += cell.induced;
        rep.coarse_total += cell.coarse;
        rep.cells.push_back(std::move(cell));
    }
    rep.passed = rep.failed_cells == 0;
    return rep;
}

inline RateIdentityReport verify_rate_identity(const JumpTable& fine, const JumpTable& coarse,
                                               const JumpMeasure& measure, double tol = 1e-10) {
    if (2.0 * fine.h != coarse.h || fine.R != coarse.R) throw ConfigError("coupling: lattices are not nested");
    return verify_rate_identity(fine, coarse, measure, build_mark_table(fine, measure), tol);
}

}  // namespace levymlmc
