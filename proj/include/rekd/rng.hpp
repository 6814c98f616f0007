#pragma once

#include "rekd/types.hpp"

#include <cstdint>

namespace rekd {

// SplitMix64: counter-based 64-bit generator (Steele, Lea, Flood; the JDK
// SplittableRandom mix). The state walks a fixed odd increment and the output
// is a bijective mix of it, so a stream is a pure function of the seed and is
// bit-identical across platforms. fork() derives an independent stream by
// remixing the current state with a tag; derived streams used here are keyed
// per purpose and per epoch, which keeps them disjoint in practice.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double();

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller; consumes two uniforms.
  double next_gaussian();

  // Independent stream keyed by (current state, tag). Does not advance this
  // generator.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Uniform draws clamped to [kProbFloor, 1 - kProbFloor] so a later
// -ln(-ln(u)) stays finite. Throws std::invalid_argument on a non-positive
// dimension.
Matrix uniform_matrix(Rng& rng, Index rows, Index cols);

// Gaussian draws with mean 0 and the given standard deviation.
Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double stddev = 1.0);

}  // namespace rekd
