#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace maxroam {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn (seed, stream tag, index) into
/// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent engine for one named purpose ("init", "partition", "data",
/// "selection", ...) derived from a master seed.
inline Rng make_stream(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return Rng(mix64(mix64(master ^ hash_tag(tag)) + mix64(index + 1)));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

/// Uniform index in [0, n). n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace maxroam
