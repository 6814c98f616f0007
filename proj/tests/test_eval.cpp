#include <doctest.h>

#include "rekd/eval.hpp"

#include <cmath>

using namespace rekd;

namespace {

BackboneSpec arch5() {
  BackboneSpec a;
  a.kind = Backbone::kPerFeatureMlp;
  a.depth = 1;
  a.width = 8;
  a.features = 5;
  a.embed_dim = 3;
  a.classes = 3;
  return a;
}

std::vector<Sample> toy_samples(int n, Index classes) {
  std::vector<Sample> out;
  Rng rng(55);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.label = i % classes;
    s.x = gaussian_matrix(rng, 5, 3);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate rejects an empty sample set") {
  PredictorNet pred = PredictorNet::init(arch5(), Rng(1));
  std::vector<Sample> none;
  CHECK_THROWS_AS(evaluate(nullptr, pred, none), std::invalid_argument);
}

TEST_CASE("a tied prediction resolves to the lowest class index") {
  const BackboneSpec a = arch5();
  PredictorNet pred = PredictorNet::init(a, Rng(2));
  // Zeroing the head makes every class logit equal the (zero) bias.
  for (Parameter& p : pred.params())
    if (p.name == "head.weight" || p.name == "head.bias") p.value.setZero();

  auto samples = toy_samples(9, a.classes);
  const EvalReport r = evaluate(nullptr, pred, samples);
  // Every sample predicts class 0; one third of the labels are 0.
  CHECK(r.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(r.per_class_accuracy.size() == 3);
  CHECK(r.per_class_accuracy[0] == 1.0);
  CHECK(r.per_class_accuracy[1] == 0.0);
  CHECK(r.per_class_accuracy[2] == 0.0);
}

TEST_CASE("classifier evaluation reads the full input") {
  const BackboneSpec a = arch5();
  PredictorNet pred = PredictorNet::init(a, Rng(3));
  auto samples = toy_samples(6, a.classes);
  const EvalReport r = evaluate(nullptr, pred, samples);
  CHECK(r.rationale_ratio_mean == 1.0);
  CHECK(r.rationale_ratio_std == 0.0);
  CHECK_FALSE(r.recovery_precision.has_value());
}

TEST_CASE("selective evaluation reports the realized ratio and is repeatable") {
  const BackboneSpec a = arch5();
  GeneratorNet gen = GeneratorNet::init(a, Rng(4));
  PredictorNet pred = PredictorNet::init(a, Rng(5));
  auto samples = toy_samples(12, a.classes);

  const EvalReport r1 = evaluate(&gen, pred, samples);
  const EvalReport r2 = evaluate(&gen, pred, samples);
  CHECK(r1.accuracy == r2.accuracy);
  CHECK(r1.rationale_ratio_mean == r2.rationale_ratio_mean);
  CHECK(r1.rationale_ratio_std == r2.rationale_ratio_std);
  CHECK(r1.rationale_ratio_mean >= 0.0);
  CHECK(r1.rationale_ratio_mean <= 1.0);

  // Evaluation leaves the models untouched.
  const std::uint64_t gsum = gen.checksum(), psum = pred.checksum();
  (void)evaluate(&gen, pred, samples);
  CHECK(gen.checksum() == gsum);
  CHECK(pred.checksum() == psum);
}

TEST_CASE("sampled evaluation is deterministic in its seed") {
  const BackboneSpec a = arch5();
  GeneratorNet gen = GeneratorNet::init(a, Rng(6));
  PredictorNet pred = PredictorNet::init(a, Rng(7));
  auto samples = toy_samples(12, a.classes);

  EvalOptions opts;
  opts.sampled = true;
  opts.sample_seed = 9;
  const EvalReport r1 = evaluate(&gen, pred, samples, opts);
  const EvalReport r2 = evaluate(&gen, pred, samples, opts);
  CHECK(r1.rationale_ratio_mean == r2.rationale_ratio_mean);
  opts.sample_seed = 10;
  const EvalReport r3 = evaluate(&gen, pred, samples, opts);
  // A different noise stream may flip selections; the report stays in range.
  CHECK(r3.rationale_ratio_mean >= 0.0);
  CHECK(r3.rationale_ratio_mean <= 1.0);
}

TEST_CASE("recovery metrics appear only when every sample is annotated") {
  const BackboneSpec a = arch5();
  GeneratorNet gen = GeneratorNet::init(a, Rng(8));
  PredictorNet pred = PredictorNet::init(a, Rng(9));
  auto samples = toy_samples(4, a.classes);
  for (Sample& s : samples) s.true_mask = std::vector<std::uint8_t>{1, 1, 0, 0, 0};

  EvalReport r = evaluate(&gen, pred, samples);
  CHECK(r.recovery_precision.has_value());
  CHECK(r.recovery_recall.has_value());
  CHECK(r.recovery_f1.has_value());

  samples[1].true_mask.reset();
  r = evaluate(&gen, pred, samples);
  CHECK_FALSE(r.recovery_precision.has_value());
}

TEST_CASE("recovery precision, recall, and f1 on hand cases") {
  const std::vector<std::uint8_t> truth = {1, 1, 0, 0};

  Prf perfect = recovery_prf(truth, truth);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  Prf empty = recovery_prf({0, 0, 0, 0}, truth);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  Prf half = recovery_prf({1, 0, 1, 0}, truth);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);
}
