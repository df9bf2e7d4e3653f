#pragma once

// Laplace-mechanism release of a count stream.
//
// Randomness is counter-based: every draw is a pure function of a 64-bit key
// and a draw index, so the serial and OpenMP kernels produce bit-identical
// streams regardless of thread count or scheduling.

#include <cstddef>
#include <cstdint>

#include "dpcorr/core_model.hpp"

namespace dpcorr {

struct RandomSeed {
  std::uint64_t value = 0;
};

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent sub-stream keys for the different consumers of one seed.
enum class StreamDomain : std::uint64_t {
  Trajectory = 0x7472616a,  // "traj"
  Release = 0x72656c73,     // "rels"
  Restart = 0x72737472,     // "rstr"
};

constexpr std::uint64_t derive_key(std::uint64_t seed, StreamDomain domain, std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(domain))) + index);
}

// Keyed counter generator with period 2^64 per key.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  constexpr std::uint64_t next_u64() noexcept {
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  constexpr double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on the open interval (-1/2, 1/2).
  constexpr double uniform_centered() noexcept { return uniform_open() - 0.5; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

double laplace_scale(const PrivacyParams& params);

/// Inverse-CDF transform: -lambda * sign(u) * ln(1 - 2|u|) for u in (-1/2, 1/2).
double laplace_from_uniform(double u, double lambda);

double sample_laplace(double lambda, CounterRng& rng);

/// Adds independent Laplace(0, lambda) noise to every cell. Cell (t, l) uses
/// draw index t*m + l of the release sub-stream of `seed`.
CountStream release_stream(const CountStream& true_counts, const PrivacyParams& params, RandomSeed seed);

/// Single-threaded reference for release_stream.
CountStream release_stream_serial(const CountStream& true_counts, const PrivacyParams& params,
                                  RandomSeed seed);

}  // namespace dpcorr
