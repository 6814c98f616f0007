#include <doctest.h>

#include "rekd/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace rekd;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("next_double lies in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_below stays under the bound and covers small ranges") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t v = rng.next_below(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("fork does not advance the parent") {
  Rng rng(3);
  const std::uint64_t before = rng.state();
  (void)rng.fork(1);
  CHECK(rng.state() == before);
}

TEST_CASE("forked streams are independent of each other and the parent") {
  Rng rng(3);
  Rng f1 = rng.fork(1), f2 = rng.fork(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t a = f1.next_u64(), b = f2.next_u64();
    same += (a == b);
  }
  CHECK(same == 0);
  // Same tag forks the same stream.
  Rng g1 = rng.fork(1);
  Rng g2 = rng.fork(1);
  for (int i = 0; i < 16; ++i) CHECK(g1.next_u64() == g2.next_u64());
}

TEST_CASE("gaussian moments are roughly standard") {
  Rng rng(19);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform_matrix respects the probability floor") {
  Rng rng(23);
  const Matrix u = uniform_matrix(rng, 50, 4);
  CHECK(u.rows() == 50);
  CHECK(u.cols() == 4);
  CHECK(u.minCoeff() >= kProbFloor);
  CHECK(u.maxCoeff() <= 1.0 - kProbFloor);
  CHECK_THROWS_AS(uniform_matrix(rng, 0, 4), std::invalid_argument);
}

TEST_CASE("gaussian_matrix scales by the requested stddev") {
  Rng a(5), b(5);
  const Matrix unit = gaussian_matrix(a, 30, 10);
  const Matrix scaled = gaussian_matrix(b, 30, 10, 0.25);
  CHECK((scaled - 0.25 * unit).cwiseAbs().maxCoeff() == 0.0);
}
