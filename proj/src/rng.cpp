#include "rekd/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rekd {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::next_below: n must be positive");
  // Multiply-shift map of a full 64-bit draw onto [0, n). The tiny modulo
  // bias is irrelevant here; what matters is that the draw count per call is
  // fixed, which keeps streams reproducible.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::next_gaussian() {
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < kProbFloor) u1 = kProbFloor;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t tag) const {
  return Rng(mix64(state_ + kGolden * (2 * tag + 1)));
}

Matrix uniform_matrix(Rng& rng, Index rows, Index cols) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("uniform_matrix: dimensions must be positive, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double u = rng.next_double();
      if (u < kProbFloor) u = kProbFloor;
      if (u > 1.0 - kProbFloor) u = 1.0 - kProbFloor;
      out(r, c) = u;
    }
  return out;
}

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double stddev) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("gaussian_matrix: dimensions must be positive");
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = stddev * rng.next_gaussian();
  return out;
}

}  // namespace rekd
