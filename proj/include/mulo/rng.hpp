#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, stream_id, counter) through Philox4x32-10, so streams can be split
// by label and handed to workers without any ordering dependence.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>

#include "mulo/tensor.hpp"

namespace mulo {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

}  // namespace detail

class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t counter() const noexcept { return counter_; }
    void set_counter(std::uint64_t c) noexcept { counter_ = c; }

    // Two 64-bit words per Philox block; the counter advances once per block.
    std::array<std::uint64_t, 2> next_block() noexcept {
        const std::array<std::uint32_t, 4> ctr{
            static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
            static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
        const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                               static_cast<std::uint32_t>(seed_ >> 32)};
        ++counter_;
        const auto out = detail::philox4x32_10(ctr, key);
        return {(static_cast<std::uint64_t>(out[1]) << 32) | out[0],
                (static_cast<std::uint64_t>(out[3]) << 32) | out[2]};
    }

    std::uint64_t next_u64() noexcept { return next_block()[0]; }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) by multiply-shift; bias is below 2^-64 * n.
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Box-Muller on one block gives two independent standard normals.
    std::array<double, 2> normal_pair() noexcept {
        const auto b = next_block();
        const double u1 = (static_cast<double>(b[0] >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(b[1] >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    double normal() noexcept { return normal_pair()[0]; }

    bool operator==(const RngStream&) const = default;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
};

// Child stream keyed by label; the parent is untouched.
inline RngStream rng_child(const RngStream& parent, std::uint64_t label) noexcept {
    const std::uint64_t id =
        detail::splitmix64(detail::splitmix64(parent.stream_id() ^ 0xA24BAED4963EE407ULL) + label);
    return RngStream(parent.seed(), id);
}

template <class... Labels>
RngStream rng_child(const RngStream& parent, std::uint64_t first, Labels... rest) noexcept {
    return rng_child(rng_child(parent, first), static_cast<std::uint64_t>(rest)...);
}

inline void fill_gaussian(std::span<double> out, double mean, double std, RngStream& rng) {
    if (!(std >= 0.0)) {
        throw std::invalid_argument("gaussian: std must be non-negative");
    }
    std::size_t i = 0;
    for (; i + 1 < out.size(); i += 2) {
        const auto z = rng.normal_pair();
        out[i] = mean + std * z[0];
        out[i + 1] = mean + std * z[1];
    }
    if (i < out.size()) out[i] = mean + std * rng.normal();
}

inline Tensor gaussian(std::size_t rows, std::size_t cols, double mean, double std, RngStream& rng) {
    Tensor t(rows, cols);
    fill_gaussian(t.flat(), mean, std, rng);
    return t;
}

}  // namespace mulo
