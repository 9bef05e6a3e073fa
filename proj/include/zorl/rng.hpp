#pragma once

#include <cstdint>
#include <random>

namespace zorl {

using Rng = std::mt19937_64;

// Stream identifiers for independent generators derived from one run seed.
enum class Stream : std::uint32_t {
  kEnvironment = 1,
  kAgent = 2,
};

/// Generator for one (seed, stream) pair; distinct streams are seeded
/// through seed_seq so they do not overlap in practice.
inline Rng make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedU};
  return Rng(seq);
}

}  // namespace zorl
