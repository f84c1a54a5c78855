#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>
#include <string_view>

namespace dataens {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Stable 64-bit tag for a stage name, so substreams can be keyed by strings.
constexpr std::uint64_t stream_tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent generator from a root seed and a key path
/// (stage, member, frequency, ...). Same inputs give the same stream
/// regardless of the order in which substreams are created.
inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = detail::splitmix64(seed);
    for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

/// Standard normal deviate. Uses Box-Muller on two uniforms so the number of
/// engine calls per deviate is fixed, independent of library caching.
inline double standard_normal(Rng& rng) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u1 = unif(rng);
    while (u1 <= 0.0) u1 = unif(rng);
    const double u2 = unif(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace dataens
