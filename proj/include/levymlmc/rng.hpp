#pragma once

// Counter-based stream derivation and the per-path generator.
//
// Every random quantity in the library descends from one 64-bit root seed.
// A path's stream is keyed by (root, level, path index) through splitmix64
// mixing, so the draws of a path never depend on which worker ran it.

#include <cmath>
#include <cstdint>
#include <limits>

namespace levymlmc {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic key for the stream of path `path` at `level` under `root`.
inline constexpr std::uint64_t stream_key(std::uint64_t root, std::uint64_t level,
                                          std::uint64_t path) noexcept {
    std::uint64_t s = root;
    std::uint64_t k = splitmix64(s);
    s = k ^ (level * 0xD1B54A32D192ED03ULL);
    k = splitmix64(s);
    s = k ^ (path * 0x8CB92BA72F3D8DD7ULL);
    return splitmix64(s);
}

/// xoshiro256** seeded from a stream key.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key = 0) noexcept { seed(key); }

    static Rng for_path(std::uint64_t root, std::uint64_t level, std::uint64_t path) noexcept {
        return Rng(stream_key(root, level, path));
    }

    void seed(std::uint64_t key) noexcept {
        std::uint64_t sm = key;
        for (auto& w : s_) w = splitmix64(sm);
        has_spare_ = false;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by the Marsaglia polar method.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, q;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            q = u * u + v * v;
        } while (q >= 1.0 || q == 0.0);
        const double f = std::sqrt(-2.0 * std::log(q) / q);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace levymlmc
