#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lrdspec {

/// SplitMix64 finalizer. Bijective on 64-bit words.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed derivation: the stream for (base, c0, c1, ...) depends
/// only on those values, never on how many other streams were drawn.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base,
                                                  std::initializer_list<std::uint64_t> counters) noexcept {
    std::uint64_t s = mix64(base);
    for (auto c : counters) s = mix64(s ^ mix64(c + 0x632be59bd9b4e019ULL));
    return s;
}

using Engine = std::mt19937_64;

[[nodiscard]] inline Engine make_engine(std::uint64_t seed) { return Engine{seed}; }

/// Uniform on [0, 1) from the top 53 bits.
[[nodiscard]] inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace lrdspec
