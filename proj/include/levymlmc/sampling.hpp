#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "levymlmc/rng.hpp"

namespace levymlmc {

/// Abstract operation counter used as the cost measure.
struct OpCounter {
    std::uint64_t jumps = 0;
    std::uint64_t comparisons = 0;
    std::uint64_t gaussians = 0;
    std::uint64_t poisson_work = 0;
    std::uint64_t coupling = 0;  // mark draws of a coupled pair

    std::uint64_t total() const { return jumps + comparisons + gaussians + poisson_work + coupling; }
    std::uint64_t single_level() const { return total() - coupling; }

    OpCounter& operator+=(const OpCounter& o) {
        jumps += o.jumps;
        comparisons += o.comparisons;
        gaussians += o.gaussians;
        poisson_work += o.poisson_work;
        coupling += o.coupling;
        return *this;
    }
};

/// Walker–Vose alias table: one uniform and one comparison per draw.
class AliasSampler {
  public:
    AliasSampler() = default;

    explicit AliasSampler(std::span<const double> weights) {
        const std::size_t n = weights.size();
        if (n == 0) return;
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(total > 0.0)) throw std::invalid_argument("alias sampler: weights must have positive sum");
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] < 0.0) throw std::invalid_argument("alias sampler: negative weight");
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto i : large) prob_[i] = 1.0;
        for (auto i : small) prob_[i] = 1.0;
    }

    std::size_t size() const { return prob_.size(); }

    std::size_t operator()(Rng& rng, OpCounter* ops = nullptr) const {
        const double u = rng.uniform() * static_cast<double>(prob_.size());
        const auto i = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
        if (ops) ops->comparisons += 1;
        return (u - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
    }

  private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

/// Cumulative table searched by bisection: ⌈log₂ n⌉ comparisons per draw.
class CdfTreeSampler {
  public:
    CdfTreeSampler() = default;

    explicit CdfTreeSampler(std::span<const double> weights) : cdf_(weights.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] < 0.0) throw std::invalid_argument("cdf sampler: negative weight");
            acc += weights[i];
            cdf_[i] = acc;
        }
        if (!(acc > 0.0)) throw std::invalid_argument("cdf sampler: weights must have positive sum");
    }

    std::size_t size() const { return cdf_.size(); }

    std::size_t operator()(Rng& rng, OpCounter* ops = nullptr) const {
        const double target = rng.uniform() * cdf_.back();
        std::size_t lo = 0, hi = cdf_.size() - 1;
        std::uint64_t c = 0;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            ++c;
            if (target < cdf_[mid]) hi = mid;
            else lo = mid + 1;
        }
        if (ops) ops->comparisons += c;
        return lo;
    }

  private:
    std::vector<double> cdf_;
};

enum class SamplerKind { alias, tree };

class DiscreteSampler {
  public:
    DiscreteSampler() = default;
    DiscreteSampler(std::span<const double> weights, SamplerKind kind) : kind_(kind) {
        if (kind == SamplerKind::alias) alias_ = AliasSampler(weights);
        else tree_ = CdfTreeSampler(weights);
    }

    SamplerKind kind() const { return kind_; }

    std::size_t operator()(Rng& rng, OpCounter* ops = nullptr) const {
        return kind_ == SamplerKind::alias ? alias_(rng, ops) : tree_(rng, ops);
    }

  private:
    SamplerKind kind_ = SamplerKind::alias;
    AliasSampler alias_;
    CdfTreeSampler tree_;
};

/// Exact Poisson(rate) draw: sequential inversion below 10, Hörmann's
/// transformed rejection (PTRS) above.
inline std::uint64_t sample_poisson(double rate, Rng& rng, OpCounter* ops = nullptr) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::domain_error("sample_poisson: invalid rate");
    if (rate == 0.0) return 0;
    if (rate < 10.0) {
        double p = std::exp(-rate);
        double cdf = p;
        const double u = rng.uniform();
        std::uint64_t k = 0;
        std::uint64_t work = 1;
        while (u > cdf) {
            ++k;
            p *= rate / static_cast<double>(k);
            const double next = cdf + p;
            ++work;
            if (next == cdf) break;  // exhausted double precision
            cdf = next;
        }
        if (ops) ops->poisson_work += work;
        return k;
    }
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    std::uint64_t work = 0;
    for (;;) {
        ++work;
        const double U = rng.uniform() - 0.5;
        const double V = rng.uniform();
        const double us = 0.5 - std::fabs(U);
        const double kd = std::floor((2.0 * a / us + b) * U + rate + 0.43);
        if (us >= 0.07 && V <= vr) {
            if (ops) ops->poisson_work += work;
            return static_cast<std::uint64_t>(kd);
        }
        if (kd < 0.0 || (us < 0.013 && V > us)) continue;
        if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -rate + kd * loglam - std::lgamma(kd + 1.0)) {
            if (ops) ops->poisson_work += work;
            return static_cast<std::uint64_t>(kd);
        }
    }
}

}  // namespace levymlmc
