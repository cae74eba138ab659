#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace ifit::sampling {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53U;
    constexpr std::uint32_t kM1 = 0xCD9E8D57U;
    constexpr std::uint32_t kW0 = 0x9E3779B9U;
    constexpr std::uint32_t kW1 = 0xBB67AE85U;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

}  // namespace detail

/// Counter-based random stream. Output is a pure function of (key, draw index),
/// so a stream derived from the same path always yields the same sequence no
/// matter which thread consumes it.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t key = 0) noexcept : key_(key) {}

    /// Stream for a hierarchical id path below a master seed, e.g.
    /// derive(seed, {kPhaseGlobal, iter}).
    static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
        return RngStream(derive_key(seed, path));
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
        std::uint64_t k = detail::splitmix64(seed);
        for (auto id : path) k = detail::splitmix64(k ^ detail::splitmix64(id + 0x632BE59BD9B4E019ULL));
        return k;
    }

    /// Child stream of this stream's key; does not consume draws.
    RngStream child(std::uint64_t id) const noexcept { return derive(key_, {id}); }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return counter_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t next_u64() noexcept {
        if ((counter_ & 1U) == 0) {
            const std::uint64_t block = counter_ >> 1;
            block_ = detail::philox4x32(
                {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0U, 0U},
                {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
        }
        const unsigned half = static_cast<unsigned>(counter_ & 1U) * 2U;
        ++counter_;
        return (std::uint64_t{block_[half]} << 32) | block_[half + 1];
    }

    /// Uniform on [0,1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0,1).
    double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        // Lemire's nearly-divisionless method.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double prob) noexcept { return uniform() < prob; }

    /// Standard normal via Box-Muller (no cached second variate).
    double normal() noexcept {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double exponential() noexcept { return -std::log(uniform_open()); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};  // output of block counter_ >> 1 once counter_ is odd
};

/// Fisher-Yates shuffle with a fixed algorithm (std::shuffle is
/// implementation-defined and would break cross-platform reproducibility).
template <typename It>
void shuffle(It first, It last, RngStream& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.uniform_index(i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace ifit::sampling
