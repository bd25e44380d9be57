#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>

namespace gsipr {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// base seed and a tuple of integer coordinates.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Pure function of (base, coords...). Different coordinate tuples give
/// statistically independent seeds; order matters.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t double_bits(double v) noexcept {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  return bits;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

// Sub-stream tags used inside one trial.
enum class Stream : std::uint64_t { Signal = 1, Measurements = 2, PowerStart = 3, Sampling = 4 };

inline std::uint64_t stream_seed(std::uint64_t trial_seed, Stream s) noexcept {
  return derive_seed(trial_seed, {static_cast<std::uint64_t>(s)});
}

}  // namespace gsipr
