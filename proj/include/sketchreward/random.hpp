#pragma once

#include <cstdint>
#include <random>

namespace sketchreward {

using Rng = std::mt19937_64;

/// Independent stream for worker/replication `index` derived from a base seed.
inline Rng make_stream(std::uint64_t base_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace sketchreward
