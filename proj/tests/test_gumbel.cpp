#include <doctest.h>

#include "rekd/gumbel.hpp"

#include <cmath>
#include <set>

using namespace rekd;

TEST_CASE("gumbel transform hits known points and survives the clamp") {
  Matrix u(1, 3);
  u << std::exp(-1.0), 0.0, 1.0;
  const Matrix g = gumbel_from_uniform(u);
  CHECK(g(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(g(0, 1)));  // u=0 clamps instead of producing -inf
  CHECK(std::isfinite(g(0, 2)));
  CHECK(g(0, 1) < g(0, 2));
}

TEST_CASE("sample_noise is deterministic in the rng state") {
  Rng a(77), b(77);
  const Matrix n1 = sample_noise(a, 12);
  const Matrix n2 = sample_noise(b, 12);
  CHECK(n1.rows() == 12);
  CHECK(n1.cols() == 2);
  CHECK((n1 - n2).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(sample_noise(a, 0), std::invalid_argument);
}

TEST_CASE("gumbel_softmax produces row distributions at the given tau") {
  Tape tape;
  Rng rng(5);
  Var z = tape.leaf(gaussian_matrix(rng, 6, 2));
  const Matrix noise = sample_noise(rng, 6);

  GumbelSample s = gumbel_softmax(z, noise, 0.7);
  for (Index l = 0; l < 6; ++l) {
    CHECK(s.soft.value().row(l).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.soft.value()(l, 0) > 0.0);
  }
  // pre_softmax is logits plus the fixed noise.
  CHECK((s.pre_softmax.value() - (z.value() + noise)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(gumbel_softmax(z, noise, 0.0), std::domain_error);
  CHECK_THROWS_AS(gumbel_softmax(z, noise.topRows(3), 0.7), std::invalid_argument);
}

TEST_CASE("lower tau sharpens the relaxed sample") {
  Tape tape;
  Matrix z(1, 2);
  z << 0.0, 0.8;
  Var zv = tape.leaf(z);
  const Matrix noise = Matrix::Zero(1, 2);
  const double warm = gumbel_softmax(zv, noise, 5.0).soft.value()(0, 1);
  const double cold = gumbel_softmax(zv, noise, 0.1).soft.value()(0, 1);
  CHECK(warm > 0.5);
  CHECK(cold > warm);
  CHECK(cold == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("discretize_st is a hard argmax mask with ties dropped") {
  Tape tape;
  Matrix z(3, 2);
  z << 0.0, 1.0,   // keep
       1.0, 0.0,   // drop
       0.5, 0.5;   // tie -> drop
  Var zv = tape.leaf(z);
  GumbelSample s = gumbel_softmax(zv, Matrix::Zero(3, 2), 1.0);
  Var m = discretize_st(s);
  CHECK(m.value()(0, 0) == 1.0);
  CHECK(m.value()(1, 0) == 0.0);
  CHECK(m.value()(2, 0) == 0.0);
}

TEST_CASE("straight-through backward copies the mask gradient to the select column") {
  Tape tape;
  Rng rng(9);
  Var zv = tape.leaf(gaussian_matrix(rng, 4, 2));
  GumbelSample s = gumbel_softmax(zv, sample_noise(rng, 4), 0.5);
  Var m = discretize_st(s);
  Matrix w(4, 1);
  w << 2.0, -3.0, 5.0, 7.0;
  Var loss = total_sum(mul(m, tape.constant(w)));
  tape.backward(loss);
  const Matrix& sg = s.soft.grad();
  for (Index l = 0; l < 4; ++l) {
    CHECK(sg(l, 1) == w(l, 0));  // passed through unchanged
    CHECK(sg(l, 0) == 0.0);
  }
}

TEST_CASE("soft_mask is the select-probability column") {
  Tape tape;
  Rng rng(13);
  Var zv = tape.leaf(gaussian_matrix(rng, 5, 2));
  GumbelSample s = gumbel_softmax(zv, sample_noise(rng, 5), 1.3);
  Var m = soft_mask(s);
  CHECK(m.rows() == 5);
  CHECK(m.cols() == 1);
  CHECK((m.value() - s.soft.value().col(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scheduler endpoints are exact and the midpoint follows the decay") {
  TemperatureScheduler sched(5.0, 0.1, 1000, 1);
  CHECK(sched.tau_at(0) == 5.0);
  CHECK(sched.tau_at(1000) == 0.1);
  CHECK(sched.tau_at(5000) == 0.1);
  // Geometric decay: halfway in steps is the geometric mean of the endpoints.
  CHECK(std::abs(sched.tau_at(500) - std::sqrt(0.5)) < 1e-6);
}

TEST_CASE("scheduler is non-increasing and holds plateaus") {
  TemperatureScheduler sched(5.0, 0.1, 400, 20);
  double prev = sched.tau_at(0);
  for (long s = 1; s <= 450; ++s) {
    const double cur = sched.tau_at(s);
    CHECK(cur <= prev);
    prev = cur;
  }
  // Constant within a window.
  CHECK(sched.tau_at(20) == sched.tau_at(39));
  CHECK(sched.tau_at(20) != sched.tau_at(40));
}

TEST_CASE("plateau count is total/anneal_every plus the final clamp") {
  const long total = 1000, every = 10;
  TemperatureScheduler sched(5.0, 0.1, total, every);
  std::set<double> values;
  for (long s = 0; s <= total; ++s) values.insert(sched.tau_at(s));
  CHECK(static_cast<long>(values.size()) == total / every + 1);
}

TEST_CASE("scheduler rejects bad construction and negative steps") {
  CHECK_THROWS_AS(TemperatureScheduler(5.0, 0.0, 100, 1), std::domain_error);
  CHECK_THROWS_AS(TemperatureScheduler(0.1, 5.0, 100, 1), std::domain_error);
  CHECK_THROWS_AS(TemperatureScheduler(5.0, 0.1, 0, 1), std::domain_error);
  CHECK_THROWS_AS(TemperatureScheduler(5.0, 0.1, 100, 0), std::domain_error);
  TemperatureScheduler sched(5.0, 0.1, 100, 1);
  CHECK_THROWS_AS(sched.tau_at(-1), std::domain_error);
}
