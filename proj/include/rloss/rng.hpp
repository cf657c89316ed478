#pragma once

#include <cstdint>
#include <random>

namespace rloss {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from exactly one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Independent, reproducible stream for a (seed, stream) pair.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return Rng(seq);
}

}  // namespace rloss
