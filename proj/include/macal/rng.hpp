#ifndef MACAL_RNG_HPP
#define MACAL_RNG_HPP

#include <cstdint>
#include <random>

namespace macal {

/// SplitMix64 finalizer; used to derive independent per-trial seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic seed for (master, sweep point, trial) so trials form
/// independent streams that do not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point, std::uint64_t trial) {
    std::uint64_t s = mix_seed(master);
    s = mix_seed(s ^ (0x9E3779B97F4A7C15ULL + point));
    s = mix_seed(s ^ (0xC2B2AE3D27D4EB4FULL + trial));
    return s;
}

using Rng = std::mt19937_64;

}  // namespace macal

#endif
