#include "rekd/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rekd {

namespace {

// Child-stream tags off the run seed. Student noise and teacher noise come
// from separate streams so disabling noise sharing never perturbs the
// student's draws.
constexpr std::uint64_t kGenInitStream = 1;
constexpr std::uint64_t kPredInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kNoiseStream = 4;
constexpr std::uint64_t kTeacherNoiseStream = 5;

Index argmax_row(const Matrix& row) {
  Index best = 0;
  for (Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, best)) best = j;
  }
  return best;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Matrix> grads_of(const BoundNet& bound) {
  std::vector<Matrix> grads;
  grads.reserve(bound.vars.size());
  for (const Var& v : bound.vars) grads.push_back(v.grad());
  return grads;
}

void check_data_shape(const BackboneSpec& arch, const std::vector<Sample>& samples,
                      const char* split) {
  if (samples.empty()) return;
  const Matrix& x = samples.front().x;
  if (x.rows() != arch.features || x.cols() != arch.embed_dim) {
    throw ConfigError(std::string(split) + " sample shape [" + std::to_string(x.rows()) +
                      "," + std::to_string(x.cols()) + "] does not match the model's [" +
                      std::to_string(arch.features) + "," + std::to_string(arch.embed_dim) +
                      "]");
  }
}

struct DevStats {
  double loss_pred = 0.0;
  double loss_re = 0.0;
  double accuracy = 0.0;
  double ratio = 0.0;
};

DevStats dev_joint(const GeneratorNet& gen, const PredictorNet& pred,
                   const std::vector<Sample>& samples, const LossWeights& w,
                   double tau_eval) {
  DevStats out;
  if (samples.empty()) return out;
  const Index features = gen.spec().features;
  double ce_sum = 0.0, sel_sum = 0.0, ratio_sum = 0.0;
  long correct = 0;
  const Matrix no_noise = Matrix::Zero(features, 2);
  for (const Sample& sample : samples) {
    Tape tape;
    BoundNet bg = bind_frozen(tape, gen);
    BoundNet bp = bind_frozen(tape, pred);
    ReForward fwd = re_forward(tape, bg, bp, sample.x, no_noise, tau_eval,
                               SelectionMode::kStraightThrough);
    ce_sum += task_ce(fwd.pred_logits, sample.label).value()(0, 0);
    sel_sum += selection_loss(fwd.mask, features, w.p_target).value()(0, 0);
    ratio_sum += fwd.mask.value().sum() / static_cast<double>(features);
    if (argmax_row(fwd.pred_logits.value()) == sample.label) ++correct;
  }
  const double n = static_cast<double>(samples.size());
  out.loss_pred = ce_sum / n;
  out.loss_re = ce_sum / n + w.lambda_select * (sel_sum / n);
  out.accuracy = static_cast<double>(correct) / n;
  out.ratio = ratio_sum / n;
  return out;
}

DevStats dev_cls(const PredictorNet& pred, const std::vector<Sample>& samples) {
  DevStats out;
  if (samples.empty()) return out;
  double ce_sum = 0.0;
  long correct = 0;
  for (const Sample& sample : samples) {
    Tape tape;
    BoundNet bp = bind_frozen(tape, pred);
    Var q = predictor_forward(tape, bp, tape.constant(sample.x));
    ce_sum += task_ce(q, sample.label).value()(0, 0);
    if (argmax_row(q.value()) == sample.label) ++correct;
  }
  const double n = static_cast<double>(samples.size());
  out.loss_pred = ce_sum / n;
  out.loss_re = out.loss_pred;
  out.accuracy = static_cast<double>(correct) / n;
  out.ratio = 1.0;
  return out;
}

// Assembles one batch's loss graph. The student's per-sample node layout is
// identical with and without a teacher, so an alpha = 1 rekd run replays an
// re run's arithmetic bit for bit when the noise is shared.
struct JointBatch {
  LossBreakdown bd;
  Var total;
  BoundNet gen, pred;
};

JointBatch build_joint_batch(Tape& tape, const LossWeights& w, const BackboneSpec& arch,
                             const GeneratorNet& gen, const PredictorNet& pred,
                             const Teacher* teacher, bool share_noise,
                             const std::vector<Sample>& train,
                             const std::vector<std::size_t>& batch, Rng& noise_rng,
                             Rng& teacher_noise_rng, double tau) {
  JointBatch out;
  out.gen = bind_trainable(tape, gen);
  out.pred = bind_trainable(tape, pred);
  BoundNet tg, tp;
  if (teacher != nullptr) {
    tg = bind_frozen(tape, teacher->generator);
    tp = bind_frozen(tape, teacher->predictor);
  }

  Var ce_sum, sel_sum, kdr_sum, kdy_sum;
  auto accumulate = [](Var& acc, Var term) { acc = acc.valid() ? add(acc, term) : term; };
  for (std::size_t idx : batch) {
    const Sample& sample = train[idx];
    const Matrix noise = sample_noise(noise_rng, arch.features);
    ReForward fwd = re_forward(tape, out.gen, out.pred, sample.x, noise, tau,
                               SelectionMode::kStraightThrough);
    accumulate(ce_sum, task_ce(fwd.pred_logits, sample.label));
    accumulate(sel_sum, selection_loss(fwd.mask, arch.features, w.p_target));
    if (teacher != nullptr) {
      const Matrix teacher_noise =
          share_noise ? noise : sample_noise(teacher_noise_rng, arch.features);
      ReForward tf = re_forward(tape, tg, tp, sample.x, teacher_noise, tau,
                                SelectionMode::kStraightThrough);
      accumulate(kdr_sum, kd_rationale(tf.sample.soft.value(), fwd.sample));
      accumulate(kdy_sum, kd_pred(tf.pred_logits.value(), fwd.pred_logits, tau));
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  Var pred_mean = scale(ce_sum, inv);
  Var sel_mean = scale(sel_sum, inv);
  Var re = re_loss(pred_mean, sel_mean, w);
  out.bd.pred = pred_mean.value()(0, 0);
  out.bd.select = sel_mean.value()(0, 0);
  out.bd.re = re.value()(0, 0);
  if (teacher != nullptr) {
    Var kdr_mean = scale(kdr_sum, inv);
    Var kdy_mean = scale(kdy_sum, inv);
    Var kd = kd_combined(kdr_mean, kdy_mean, tau, w);
    out.total = rekd_total(re, kd, w);
    out.bd.kd_r = kdr_mean.value()(0, 0);
    out.bd.kd_y = kdy_mean.value()(0, 0);
    out.bd.kd = kd.value()(0, 0);
  } else {
    out.total = re;
  }
  out.bd.total = out.total.value()(0, 0);
  return out;
}

ModelSnapshot snapshot_joint(const GeneratorNet& gen, const PredictorNet& pred,
                             double criterion, int epoch) {
  ModelSnapshot snap;
  snap.generator = gen;
  snap.predictor = pred;
  snap.dev_criterion = criterion;
  snap.epoch = epoch;
  return snap;
}

void check_teacher(const Teacher& teacher, const BackboneSpec& arch) {
  const BackboneSpec& gs = teacher.generator.spec();
  const BackboneSpec& ps = teacher.predictor.spec();
  if (gs.features != arch.features || gs.embed_dim != arch.embed_dim) {
    throw ConfigError("teacher generator expects inputs [" + std::to_string(gs.features) +
                      "," + std::to_string(gs.embed_dim) + "], student trains on [" +
                      std::to_string(arch.features) + "," + std::to_string(arch.embed_dim) +
                      "]");
  }
  if (ps.classes != arch.classes) {
    throw ConfigError("teacher predicts " + std::to_string(ps.classes) +
                      " classes, student needs " + std::to_string(arch.classes));
  }
}

TrainResult train_joint(const TrainConfig& cfg, const BackboneSpec& arch,
                        const Dataset& data, const Teacher* teacher) {
  cfg.validate();
  arch.validate();
  check_data_shape(arch, data.train, "train");
  check_data_shape(arch, data.dev, "dev");
  check_data_shape(arch, data.test, "test");
  if (teacher != nullptr) check_teacher(*teacher, arch);
  if (cfg.epochs > 0 && data.train.empty()) throw ConfigError("training set is empty");

  const auto t0 = std::chrono::steady_clock::now();
  Rng root(cfg.seed);
  Rng gen_rng = root.fork(kGenInitStream);
  Rng pred_rng = root.fork(kPredInitStream);
  GeneratorNet gen = GeneratorNet::init(arch, gen_rng);
  PredictorNet pred = PredictorNet::init(arch, pred_rng);

  const AdamW opt{cfg.lr, cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  AdamW::State gen_state = AdamW::init_state(gen);
  AdamW::State pred_state = AdamW::init_state(pred);
  const SchedulerConfig sc = resolve_schedule(cfg, data.train.size());
  const TemperatureScheduler sched(sc.tau0, sc.tau_final, sc.total_steps, sc.anneal_every);

  TrainResult out;
  {
    const DevStats dev0 = dev_joint(gen, pred, data.dev, cfg.weights, sc.tau_final);
    out.init = snapshot_joint(gen, pred, dev0.loss_re, 0);
  }

  long step = 0;
  double best_criterion = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs && !out.diverged; ++epoch) {
    Rng shuffle_rng = root.fork(kShuffleStream).fork(static_cast<std::uint64_t>(epoch));
    Rng noise_rng = root.fork(kNoiseStream).fork(static_cast<std::uint64_t>(epoch));
    Rng teacher_noise_rng =
        root.fork(kTeacherNoiseStream).fork(static_cast<std::uint64_t>(epoch));
    const auto batches = epoch_batches(data.train.size(), cfg.batch_size, shuffle_rng);

    double sum_total = 0.0, sum_pred = 0.0, sum_select = 0.0, sum_kdr = 0.0, sum_kdy = 0.0;
    double tau = sched.tau_at(step);
    int batches_done = 0;
    for (const auto& batch : batches) {
      tau = sched.tau_at(step);
      Tape tape;
      JointBatch jb = build_joint_batch(tape, cfg.weights, arch, gen, pred, teacher,
                                        cfg.share_gumbel_noise, data.train, batch,
                                        noise_rng, teacher_noise_rng, tau);
      if (!std::isfinite(jb.bd.total)) {
        out.diverged = true;
        out.divergence_note = "non-finite loss at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step);
        break;
      }
      tape.backward(jb.total);
      try {
        opt.step(gen.params(), grads_of(jb.gen), gen_state);
        opt.step(pred.params(), grads_of(jb.pred), pred_state);
      } catch (const std::runtime_error& e) {
        out.diverged = true;
        out.divergence_note = std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step);
        break;
      }
      ++step;
      ++batches_done;
      sum_total += jb.bd.total;
      sum_pred += jb.bd.pred;
      sum_select += jb.bd.select;
      sum_kdr += jb.bd.kd_r;
      sum_kdy += jb.bd.kd_y;
    }
    // A divergent epoch leaves no row and no snapshot; last/best stay at the
    // final healthy epoch.
    if (out.diverged || batches_done == 0) break;

    const DevStats dev = dev_joint(gen, pred, data.dev, cfg.weights, sc.tau_final);
    MetricsRow row;
    row.epoch = epoch;
    row.step = step;
    row.tau = tau;
    row.loss_total = sum_total / batches_done;
    row.loss_pred = sum_pred / batches_done;
    row.loss_select = sum_select / batches_done;
    if (teacher != nullptr) {
      row.loss_kd_r = sum_kdr / batches_done;
      row.loss_kd_y = sum_kdy / batches_done;
    }
    row.dev_loss_re = dev.loss_re;
    row.dev_loss_pred = dev.loss_pred;
    row.dev_accuracy = dev.accuracy;
    row.rationale_ratio = dev.ratio;
    if (cfg.record_seconds) row.seconds = seconds_since(t0);
    out.metrics.push_back(row);

    out.last = snapshot_joint(gen, pred, dev.loss_re, epoch);
    if (dev.loss_re < best_criterion) {
      best_criterion = dev.loss_re;
      out.best = snapshot_joint(gen, pred, dev.loss_re, epoch);
    }
  }

  out.best_epoch = out.best.has_value() ? out.best->epoch : 0;
  const ModelSnapshot& chosen = out.best.has_value() ? *out.best : out.init;
  if (!data.test.empty()) {
    EvalOptions eo;
    eo.tau_eval = sc.tau_final;
    out.test_report = evaluate(&*chosen.generator, chosen.predictor, data.test, eo);
  }
  return out;
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kCls: return "cls";
    case Regime::kRe: return "re";
    case Regime::kRekd: return "rekd";
  }
  throw std::logic_error("unreachable regime");
}

Regime regime_from_string(const std::string& name) {
  if (name == "cls") return Regime::kCls;
  if (name == "re") return Regime::kRe;
  if (name == "rekd") return Regime::kRekd;
  throw ConfigError("unknown regime '" + name + "' (expected cls, re, or rekd)");
}

void TrainConfig::validate() const {
  weights.validate();
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in [0,1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (regime != Regime::kCls) {
    if (!(schedule.tau_final > 0.0)) throw ConfigError("tau_final must be > 0");
    if (!(schedule.tau0 >= schedule.tau_final)) {
      throw ConfigError("tau0 must be >= tau_final");
    }
    if (schedule.total_steps < 0) throw ConfigError("anneal_steps must be >= 0");
    if (schedule.anneal_every < 0) throw ConfigError("anneal_every must be >= 0");
  }
  if (regime == Regime::kRekd && teacher_checkpoint.empty()) {
    throw ConfigError("rekd training requires --teacher (path to the teacher checkpoint)");
  }
}

SchedulerConfig resolve_schedule(const TrainConfig& cfg, std::size_t n_train) {
  SchedulerConfig sc = cfg.schedule;
  if (sc.total_steps == 0) {
    const long per_epoch =
        n_train == 0 ? 0
                     : static_cast<long>((n_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                         static_cast<std::size_t>(cfg.batch_size));
    sc.total_steps = std::max<long>(1, static_cast<long>(cfg.epochs) * per_epoch);
  }
  if (sc.anneal_every == 0) sc.anneal_every = std::max<long>(1, sc.total_steps / 100);
  return sc;
}

AdamW::State AdamW::init_state(const Net& net) {
  State state;
  state.m.reserve(net.params().size());
  state.v.reserve(net.params().size());
  for (const Parameter& p : net.params()) {
    state.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    state.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return state;
}

void AdamW::step(std::vector<Parameter>& params, const std::vector<Matrix>& grads,
                 State& state) const {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("AdamW::step: parameter/gradient/state size mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params[i].value;
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw std::invalid_argument("AdamW::step: gradient shape mismatch for '" +
                                  params[i].name + "'");
    }
    if (!g.allFinite()) {
      throw std::runtime_error("non-finite gradient for '" + params[i].name + "'");
    }
    if (weight_decay != 0.0) p -= (lr * weight_decay) * p;
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i].array() = beta2 * state.v[i].array() + (1.0 - beta2) * g.array().square();
    p.array() -=
        lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + eps);
  }
}

TrainResult train_cls(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data) {
  cfg.validate();
  arch.validate();
  check_data_shape(arch, data.train, "train");
  check_data_shape(arch, data.dev, "dev");
  check_data_shape(arch, data.test, "test");
  if (cfg.epochs > 0 && data.train.empty()) throw ConfigError("training set is empty");

  const auto t0 = std::chrono::steady_clock::now();
  Rng root(cfg.seed);
  Rng pred_rng = root.fork(kPredInitStream);
  PredictorNet pred = PredictorNet::init(arch, pred_rng);
  const AdamW opt{cfg.lr, cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  AdamW::State pred_state = AdamW::init_state(pred);

  TrainResult out;
  {
    const DevStats dev0 = dev_cls(pred, data.dev);
    out.init.predictor = pred;
    out.init.dev_criterion = dev0.loss_pred;
    out.init.epoch = 0;
  }

  long step = 0;
  double best_criterion = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs && !out.diverged; ++epoch) {
    Rng shuffle_rng = root.fork(kShuffleStream).fork(static_cast<std::uint64_t>(epoch));
    const auto batches = epoch_batches(data.train.size(), cfg.batch_size, shuffle_rng);
    double sum_total = 0.0;
    int batches_done = 0;
    for (const auto& batch : batches) {
      Tape tape;
      BoundNet bp = bind_trainable(tape, pred);
      Var ce_sum;
      for (std::size_t idx : batch) {
        const Sample& sample = data.train[idx];
        Var q = predictor_forward(tape, bp, tape.constant(sample.x));
        Var ce = task_ce(q, sample.label);
        ce_sum = ce_sum.valid() ? add(ce_sum, ce) : ce;
      }
      Var loss = scale(ce_sum, 1.0 / static_cast<double>(batch.size()));
      const double loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        out.diverged = true;
        out.divergence_note = "non-finite loss at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step);
        break;
      }
      tape.backward(loss);
      try {
        opt.step(pred.params(), grads_of(bp), pred_state);
      } catch (const std::runtime_error& e) {
        out.diverged = true;
        out.divergence_note = std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step);
        break;
      }
      ++step;
      ++batches_done;
      sum_total += loss_value;
    }
    if (out.diverged || batches_done == 0) break;

    const DevStats dev = dev_cls(pred, data.dev);
    MetricsRow row;
    row.epoch = epoch;
    row.step = step;
    row.loss_total = sum_total / batches_done;
    row.loss_pred = row.loss_total;
    row.dev_loss_pred = dev.loss_pred;
    row.dev_accuracy = dev.accuracy;
    row.rationale_ratio = dev.ratio;
    if (cfg.record_seconds) row.seconds = seconds_since(t0);
    out.metrics.push_back(row);

    ModelSnapshot snap;
    snap.predictor = pred;
    snap.dev_criterion = dev.loss_pred;
    snap.epoch = epoch;
    out.last = snap;
    if (dev.loss_pred < best_criterion) {
      best_criterion = dev.loss_pred;
      out.best = snap;
    }
  }

  out.best_epoch = out.best.has_value() ? out.best->epoch : 0;
  const ModelSnapshot& chosen = out.best.has_value() ? *out.best : out.init;
  if (!data.test.empty()) {
    out.test_report = evaluate(nullptr, chosen.predictor, data.test, EvalOptions{});
  }
  return out;
}

TrainResult train_re(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data) {
  if (cfg.regime != Regime::kRe) throw ConfigError("train_re called with a non-re config");
  return train_joint(cfg, arch, data, nullptr);
}

TrainResult train_rekd(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data,
                       const Teacher& teacher) {
  if (cfg.regime != Regime::kRekd) throw ConfigError("train_rekd called with a non-rekd config");
  return train_joint(cfg, arch, data, &teacher);
}

std::size_t select_best(const std::vector<double>& dev_history) {
  if (dev_history.empty()) throw std::invalid_argument("select_best: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_history.size(); ++i) {
    if (dev_history[i] < dev_history[best]) best = i;
  }
  return best;
}

LossBreakdown probe_first_batch(const TrainConfig& cfg, const BackboneSpec& arch,
                                const Dataset& data, const Teacher* teacher) {
  cfg.validate();
  arch.validate();
  if (data.train.empty()) throw ConfigError("training set is empty");
  if (teacher != nullptr) check_teacher(*teacher, arch);

  Rng root(cfg.seed);
  Rng gen_rng = root.fork(kGenInitStream);
  Rng pred_rng = root.fork(kPredInitStream);
  GeneratorNet gen = GeneratorNet::init(arch, gen_rng);
  PredictorNet pred = PredictorNet::init(arch, pred_rng);

  Rng shuffle_rng = root.fork(kShuffleStream).fork(1);
  Rng noise_rng = root.fork(kNoiseStream).fork(1);
  Rng teacher_noise_rng = root.fork(kTeacherNoiseStream).fork(1);
  const auto batches = epoch_batches(data.train.size(), cfg.batch_size, shuffle_rng);
  const SchedulerConfig sc = resolve_schedule(cfg, data.train.size());
  const TemperatureScheduler sched(sc.tau0, sc.tau_final, sc.total_steps, sc.anneal_every);

  Tape tape;
  JointBatch jb = build_joint_batch(tape, cfg.weights, arch, gen, pred, teacher,
                                    cfg.share_gumbel_noise, data.train, batches.front(),
                                    noise_rng, teacher_noise_rng, sched.tau_at(0));
  return jb.bd;
}

}  // namespace rekd
