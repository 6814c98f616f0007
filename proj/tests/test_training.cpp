#include <doctest.h>

#include "rekd/artifacts.hpp"
#include "rekd/training.hpp"

#include <cmath>

using namespace rekd;

namespace {

BackboneSpec tiny_arch() {
  BackboneSpec a;
  a.kind = Backbone::kPerFeatureMlp;
  a.depth = 1;
  a.width = 8;
  a.features = 6;
  a.embed_dim = 3;
  a.classes = 2;
  return a;
}

DatasetSpec tiny_data_spec() {
  DatasetSpec s;
  s.features = 6;
  s.embed_dim = 3;
  s.classes = 2;
  s.k_signal = 2;
  s.n_train = 16;
  s.n_dev = 8;
  s.n_test = 8;
  s.noise_std = 0.3;
  s.seed = 5;
  return s;
}

TrainConfig tiny_config(Regime regime) {
  TrainConfig cfg;
  cfg.regime = regime;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.lr = 3e-3;
  cfg.seed = 2;
  if (regime == Regime::kRekd) cfg.teacher_checkpoint = "unused-in-process";
  return cfg;
}

Teacher tiny_teacher() {
  const BackboneSpec a = tiny_arch();
  return Teacher{GeneratorNet::init(a, Rng(100)), PredictorNet::init(a, Rng(101))};
}

}  // namespace

TEST_CASE("regime names round-trip") {
  CHECK(to_string(Regime::kCls) == "cls");
  CHECK(to_string(Regime::kRe) == "re");
  CHECK(to_string(Regime::kRekd) == "rekd");
  CHECK(regime_from_string("rekd") == Regime::kRekd);
  CHECK_THROWS_AS(regime_from_string("distill"), ConfigError);
}

TEST_CASE("schedule resolution fills the auto fields") {
  TrainConfig cfg = tiny_config(Regime::kRe);
  cfg.epochs = 55;
  cfg.batch_size = 32;
  SchedulerConfig sc = resolve_schedule(cfg, 480);  // ceil(480/32) = 15 steps per epoch
  CHECK(sc.total_steps == 825);
  CHECK(sc.anneal_every == 8);  // 825/100 floored, min 1

  cfg.epochs = 2;
  cfg.batch_size = 7;
  sc = resolve_schedule(cfg, 20);  // ceil(20/7) = 3
  CHECK(sc.total_steps == 6);
  CHECK(sc.anneal_every == 1);

  cfg.schedule.total_steps = 1234;
  cfg.schedule.anneal_every = 17;
  sc = resolve_schedule(cfg, 20);
  CHECK(sc.total_steps == 1234);
  CHECK(sc.anneal_every == 17);
}

TEST_CASE("config validation names the broken field") {
  TrainConfig cfg = tiny_config(Regime::kRe);
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "lr must be > 0", ConfigError);
  cfg = tiny_config(Regime::kRe);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(Regime::kRekd);
  cfg.teacher_checkpoint.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(Regime::kRe);
  cfg.weights.alpha = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("adamw first step moves by almost exactly lr against unit curvature") {
  BackboneSpec a = tiny_arch();
  PredictorNet net = PredictorNet::init(a, Rng(1));
  AdamW opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.0;
  AdamW::State st = AdamW::init_state(net);

  std::vector<Matrix> grads;
  for (const Parameter& p : net.params())
    grads.push_back(Matrix::Ones(p.value.rows(), p.value.cols()));
  const Matrix before = net.params()[0].value;
  opt.step(net.params(), grads, st);
  const Matrix moved = before - net.params()[0].value;
  // m-hat / (sqrt(v-hat) + eps) = 1 / (1 + 1e-8) on the first step.
  CHECK(moved.minCoeff() == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(moved.maxCoeff() < 0.1);  // eps keeps it strictly under lr
  CHECK(st.step == 1);
}

TEST_CASE("adamw weight decay is decoupled from the gradient") {
  BackboneSpec a = tiny_arch();
  PredictorNet net = PredictorNet::init(a, Rng(2));
  AdamW opt;
  opt.lr = 0.5;
  opt.weight_decay = 0.1;
  AdamW::State st = AdamW::init_state(net);

  std::vector<Matrix> grads;
  for (const Parameter& p : net.params())
    grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  const Matrix before = net.params()[0].value;
  opt.step(net.params(), grads, st);
  // Zero gradient: the only movement is the multiplicative decay.
  CHECK((net.params()[0].value - before * (1.0 - 0.5 * 0.1)).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("adamw rejects bad gradients") {
  BackboneSpec a = tiny_arch();
  PredictorNet net = PredictorNet::init(a, Rng(3));
  AdamW opt;
  AdamW::State st = AdamW::init_state(net);

  std::vector<Matrix> grads;
  for (const Parameter& p : net.params())
    grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  grads[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(opt.step(net.params(), grads, st), std::runtime_error);

  grads[0] = Matrix::Zero(1, 1);
  CHECK_THROWS_AS(opt.step(net.params(), grads, st), std::invalid_argument);
}

TEST_CASE("select_best takes the earliest minimum") {
  CHECK(select_best({3.0, 1.0, 2.0}) == 1);
  CHECK(select_best({2.0, 1.0, 1.0}) == 1);
  CHECK(select_best({5.0}) == 0);
  CHECK_THROWS_AS(select_best({}), std::invalid_argument);
}

TEST_CASE("classifier training fills the cls metric columns") {
  const Dataset data = gen_planted(tiny_data_spec());
  TrainResult r = train_cls(tiny_config(Regime::kCls), tiny_arch(), data);

  CHECK_FALSE(r.diverged);
  REQUIRE(r.metrics.size() == 3);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_epoch <= 3);
  for (const MetricsRow& row : r.metrics) {
    CHECK_FALSE(row.tau.has_value());
    CHECK_FALSE(row.loss_select.has_value());
    CHECK_FALSE(row.loss_kd_r.has_value());
    CHECK_FALSE(row.dev_loss_re.has_value());
    REQUIRE(row.rationale_ratio.has_value());
    CHECK(*row.rationale_ratio == 1.0);  // the classifier reads the whole input
  }
  REQUIRE(r.best.has_value());
  CHECK_FALSE(r.best->generator.has_value());
  // The selected epoch scores the smallest dev loss.
  double best_dev = r.metrics[static_cast<std::size_t>(r.best_epoch - 1)].dev_loss_pred;
  for (const MetricsRow& row : r.metrics) CHECK(best_dev <= row.dev_loss_pred);
  CHECK(r.best->dev_criterion == best_dev);
}

TEST_CASE("joint training fills the re metric columns and selects by the re criterion") {
  const Dataset data = gen_planted(tiny_data_spec());
  TrainResult r = train_re(tiny_config(Regime::kRe), tiny_arch(), data);

  CHECK_FALSE(r.diverged);
  REQUIRE(r.metrics.size() == 3);
  for (const MetricsRow& row : r.metrics) {
    REQUIRE(row.tau.has_value());
    REQUIRE(row.loss_select.has_value());
    CHECK_FALSE(row.loss_kd_r.has_value());
    REQUIRE(row.dev_loss_re.has_value());
    REQUIRE(row.rationale_ratio.has_value());
    CHECK(*row.rationale_ratio >= 0.0);
    CHECK(*row.rationale_ratio <= 1.0);
  }
  REQUIRE(r.best.has_value());
  CHECK(r.best->generator.has_value());
  double best_dev = *r.metrics[static_cast<std::size_t>(r.best_epoch - 1)].dev_loss_re;
  for (const MetricsRow& row : r.metrics) CHECK(best_dev <= *row.dev_loss_re);
  CHECK(r.best->dev_criterion == best_dev);
  // Temperatures follow the shared scheduler downward.
  CHECK(*r.metrics.front().tau >= *r.metrics.back().tau);
}

TEST_CASE("alpha=1 distillation reproduces the re trajectory bit for bit") {
  const Dataset data = gen_planted(tiny_data_spec());
  TrainConfig re_cfg = tiny_config(Regime::kRe);
  TrainConfig kd_cfg = tiny_config(Regime::kRekd);
  kd_cfg.weights.alpha = 1.0;

  TrainResult re = train_re(re_cfg, tiny_arch(), data);
  TrainResult kd = train_rekd(kd_cfg, tiny_arch(), data, tiny_teacher());

  REQUIRE(re.metrics.size() == kd.metrics.size());
  for (std::size_t i = 0; i < re.metrics.size(); ++i) {
    const MetricsRow& a = re.metrics[i];
    const MetricsRow& b = kd.metrics[i];
    CHECK(a.epoch == b.epoch);
    CHECK(a.step == b.step);
    CHECK(*a.tau == *b.tau);
    CHECK(a.loss_total == b.loss_total);
    CHECK(a.loss_pred == b.loss_pred);
    CHECK(*a.loss_select == *b.loss_select);
    CHECK(*a.dev_loss_re == *b.dev_loss_re);
    CHECK(a.dev_loss_pred == b.dev_loss_pred);
    CHECK(a.dev_accuracy == b.dev_accuracy);
    CHECK(*a.rationale_ratio == *b.rationale_ratio);
    // Distillation columns exist only on the distillation side.
    CHECK_FALSE(a.loss_kd_r.has_value());
    CHECK(b.loss_kd_r.has_value());
  }
  CHECK(re.test_report.accuracy == kd.test_report.accuracy);
}

TEST_CASE("repeated runs are bitwise identical") {
  const Dataset data = gen_planted(tiny_data_spec());
  const TrainConfig cfg = tiny_config(Regime::kRe);
  TrainResult a = train_re(cfg, tiny_arch(), data);
  TrainResult b = train_re(cfg, tiny_arch(), data);
  CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
  CHECK(a.best->predictor.checksum() == b.best->predictor.checksum());
  CHECK(a.best->generator->checksum() == b.best->generator->checksum());
}

TEST_CASE("an exploding run is cut off and flagged") {
  const Dataset data = gen_planted(tiny_data_spec());
  TrainConfig cfg = tiny_config(Regime::kRe);
  cfg.lr = 1e300;  // blows up the parameters within a couple of steps
  TrainResult r = train_re(cfg, tiny_arch(), data);
  CHECK(r.diverged);
  CHECK(r.divergence_note.find("epoch") != std::string::npos);
  // The divergent epoch writes no row; earlier healthy epochs stay published.
  CHECK(r.metrics.size() < static_cast<std::size_t>(cfg.epochs));
  CHECK(r.last.has_value() == !r.metrics.empty());
  CHECK(r.best_epoch == (r.best.has_value() ? r.best->epoch : 0));
}

TEST_CASE("first-batch probe reports a consistent breakdown") {
  const Dataset data = gen_planted(tiny_data_spec());
  {
    TrainConfig cfg = tiny_config(Regime::kRe);
    const LossBreakdown b = probe_first_batch(cfg, tiny_arch(), data, nullptr);
    const SchedulerConfig sc = resolve_schedule(cfg, data.train.size());
    const double tau0 = TemperatureScheduler(sc.tau0, sc.tau_final, sc.total_steps,
                                             sc.anneal_every)
                            .tau_at(0);
    // without a teacher the probe is the pure select-predict objective
    LossWeights pure = cfg.weights;
    pure.alpha = 1.0;
    CHECK(b.consistent(pure, tau0));
    CHECK(b.kd_r == 0.0);
    CHECK(b.total == b.re);
  }
  {
    TrainConfig cfg = tiny_config(Regime::kRekd);
    const Teacher teacher = tiny_teacher();
    const LossBreakdown b = probe_first_batch(cfg, tiny_arch(), data, &teacher);
    const SchedulerConfig sc = resolve_schedule(cfg, data.train.size());
    const double tau0 = TemperatureScheduler(sc.tau0, sc.tau_final, sc.total_steps,
                                             sc.anneal_every)
                            .tau_at(0);
    CHECK(b.consistent(cfg.weights, tau0));
    CHECK(b.kd_r > 0.0);
    CHECK(b.kd_y > 0.0);
    CHECK(b.total > 0.0);
  }
}
