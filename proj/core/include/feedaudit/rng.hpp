#pragma once

// Seed derivation tree: every random stream in the library is keyed by the
// root seed plus a path of integer tags (module, user, trajectory, trial...),
// so results never depend on evaluation order or thread scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace feedaudit {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
    return splitmix64(splitmix64(parent) ^ (tag + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    for (auto tag : path) parent = derive_seed(parent, tag);
    return parent;
}

/// Tags for the first level of the derivation tree.
namespace stream {
inline constexpr std::uint64_t simulate = 1;
inline constexpr std::uint64_t cover_time = 2;
inline constexpr std::uint64_t iid = 3;
inline constexpr std::uint64_t regulatory = 4;
inline constexpr std::uint64_t counterfactual = 5;
inline constexpr std::uint64_t scenario = 6;
inline constexpr std::uint64_t feeds = 7;
inline constexpr std::uint64_t trial = 8;
inline constexpr std::uint64_t calibration = 9;
inline constexpr std::uint64_t adversarial = 10;
}  // namespace stream

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace feedaudit
