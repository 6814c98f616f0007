#pragma once

#include "rekd/data.hpp"
#include "rekd/eval.hpp"
#include "rekd/gumbel.hpp"
#include "rekd/losses.hpp"
#include "rekd/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rekd {

enum class Regime { kCls, kRe, kRekd };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct SchedulerConfig {
  double tau0 = 5.0;
  double tau_final = 0.1;
  // 0 means one full run: epochs * ceil(n_train / batch_size).
  long total_steps = 0;
  // 0 means total_steps / 100, floored at 1.
  long anneal_every = 0;
};

struct TrainConfig {
  Regime regime = Regime::kRe;
  LossWeights weights;
  SchedulerConfig schedule;
  int epochs = 55;
  int batch_size = 32;
  double lr = 3e-3;
  double weight_decay = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::string teacher_checkpoint;  // required for the rekd regime
  // When true the student reuses the teacher's Gumbel draws; otherwise the
  // teacher gets an independent stream.
  bool share_gumbel_noise = true;
  // Wall-clock seconds in metrics.csv break byte-level run comparison, so
  // the column stays empty unless asked for.
  bool record_seconds = false;

  void validate() const;  // ConfigError naming the offending field
};

// Fills in the auto (zero) scheduler fields for a given training-set size.
SchedulerConfig resolve_schedule(const TrainConfig& cfg, std::size_t n_train);

struct AdamW {
  double lr = 3e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  struct State {
    std::vector<Matrix> m, v;
    long step = 0;
  };

  static State init_state(const Net& net);

  // Decoupled decay (p -= lr*wd*p) applied before the bias-corrected moment
  // update. Non-finite gradients raise std::runtime_error naming the
  // parameter.
  void step(std::vector<Parameter>& params, const std::vector<Matrix>& grads,
            State& state) const;
};

// One metrics.csv row. Empty optionals render as empty fields: selection and
// temperature columns stay empty for cls runs, distillation columns for
// anything but rekd.
struct MetricsRow {
  int epoch = 0;
  long step = 0;  // optimizer steps taken so far
  std::optional<double> tau;
  double loss_total = 0.0;
  double loss_pred = 0.0;
  std::optional<double> loss_select, loss_kd_r, loss_kd_y;
  std::optional<double> dev_loss_re;
  double dev_loss_pred = 0.0;
  double dev_accuracy = 0.0;
  std::optional<double> rationale_ratio;
  std::optional<double> seconds;
};

struct ModelSnapshot {
  std::optional<GeneratorNet> generator;
  PredictorNet predictor;
  double dev_criterion = 0.0;
  int epoch = 0;
};

struct Teacher {
  GeneratorNet generator;
  PredictorNet predictor;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  ModelSnapshot init;  // state before any update, with its dev criterion
  std::optional<ModelSnapshot> best, last;
  int best_epoch = 0;  // 0 when no epoch completed
  bool diverged = false;
  std::string divergence_note;
  EvalReport test_report;  // best model (init if no epoch ran) on the test split
};

// Model selection minimizes the dev criterion: task loss for cls, task plus
// weighted selection loss for the joint regimes. Dev metrics are computed
// noise-free at the scheduler's final temperature.
TrainResult train_cls(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data);
TrainResult train_re(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data);
TrainResult train_rekd(const TrainConfig& cfg, const BackboneSpec& arch, const Dataset& data,
                       const Teacher& teacher);

// Index of the smallest entry, ties resolved to the earliest epoch.
std::size_t select_best(const std::vector<double>& dev_history);

// Loss components of the first training batch at initialization, without
// applying an update. teacher may be null for the re regime.
LossBreakdown probe_first_batch(const TrainConfig& cfg, const BackboneSpec& arch,
                                const Dataset& data, const Teacher* teacher);

}  // namespace rekd
