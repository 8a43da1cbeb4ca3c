// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace memaudit {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// single global seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream `stream` under `global_seed`. Every random component
/// (background text, canaries, each generated sequence) draws from its own
/// stream so results do not depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t stream) noexcept {
  return splitmix64(global_seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Well-known stream ids.
namespace streams {
inline constexpr std::uint64_t kBackground = 1;
inline constexpr std::uint64_t kLexicon = 2;
inline constexpr std::uint64_t kCanaries = 3;
inline constexpr std::uint64_t kPlacement = 4;
inline constexpr std::uint64_t kReferenceBackground = 5;
inline constexpr std::uint64_t kWindowSampling = 6;
// Generated sequence i uses stream kSequenceBase + i.
inline constexpr std::uint64_t kSequenceBase = 1ULL << 32;
}  // namespace streams

/// mt19937_64 with portable distributions. The standard library
/// distributions are implementation-defined, so outputs would differ
/// between libstdc++ and libc++; these do not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) {
    // Rejection sampling on the top of the range keeps this unbiased.
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace memaudit
