#pragma once

#include <cstdint>

namespace polypgen {

/// Independent, reproducible sub-seed for a named stream (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t sampling = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t sweep = 5;
}  // namespace streams

}  // namespace polypgen
