#include "rekd/eval.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rekd/gumbel.hpp"
#include "rekd/rng.hpp"
#include "rekd/tape.hpp"

namespace rekd {

namespace {

Index argmax_row(const Matrix& row) {
  Index best = 0;
  for (Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, best)) best = j;
  }
  return best;
}

}  // namespace

EvalReport evaluate(const GeneratorNet* generator, const PredictorNet& predictor,
                    const std::vector<Sample>& samples, const EvalOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
  const BackboneSpec& spec = predictor.spec();
  if (generator != nullptr && generator->spec().features != spec.features) {
    throw std::invalid_argument("evaluate: generator and predictor disagree on feature count");
  }

  Rng noise_rng(opts.sample_seed);
  std::vector<long> class_total(static_cast<std::size_t>(spec.classes), 0);
  std::vector<long> class_correct(static_cast<std::size_t>(spec.classes), 0);
  long correct = 0;
  double ratio_sum = 0.0, ratio_sq_sum = 0.0;
  long tp = 0, fp = 0, fn = 0;
  bool have_truth = true;

  for (const Sample& sample : samples) {
    if (sample.label < 0 || sample.label >= spec.classes) {
      throw std::invalid_argument("evaluate: label " + std::to_string(sample.label) +
                                  " out of range for " + std::to_string(spec.classes) +
                                  " classes");
    }
    Tape tape;
    BoundNet bp = bind_frozen(tape, predictor);
    Matrix mask;
    Matrix q;
    if (generator != nullptr) {
      BoundNet bg = bind_frozen(tape, *generator);
      Matrix noise = opts.sampled ? sample_noise(noise_rng, spec.features)
                                  : Matrix::Zero(spec.features, 2);
      ReForward fwd = re_forward(tape, bg, bp, sample.x, noise, opts.tau_eval,
                                 SelectionMode::kStraightThrough);
      mask = fwd.mask.value();
      q = fwd.pred_logits.value();
    } else {
      mask = Matrix::Ones(spec.features, 1);
      q = predictor_forward(tape, bp, tape.constant(sample.x)).value();
    }

    const Index predicted = argmax_row(q);
    class_total[static_cast<std::size_t>(sample.label)] += 1;
    if (predicted == sample.label) {
      correct += 1;
      class_correct[static_cast<std::size_t>(sample.label)] += 1;
    }

    const double ratio = mask.sum() / static_cast<double>(spec.features);
    ratio_sum += ratio;
    ratio_sq_sum += ratio * ratio;

    if (sample.true_mask.has_value()) {
      const auto& truth = *sample.true_mask;
      if (static_cast<Index>(truth.size()) != spec.features) {
        throw std::invalid_argument("evaluate: true mask length mismatch");
      }
      for (Index l = 0; l < spec.features; ++l) {
        const bool sel = mask(l, 0) != 0.0;
        const bool tru = truth[static_cast<std::size_t>(l)] != 0;
        if (sel && tru) ++tp;
        else if (sel && !tru) ++fp;
        else if (!sel && tru) ++fn;
      }
    } else {
      have_truth = false;
    }
  }

  EvalReport report;
  const double n = static_cast<double>(samples.size());
  report.accuracy = static_cast<double>(correct) / n;
  report.rationale_ratio_mean = ratio_sum / n;
  const double var = ratio_sq_sum / n - report.rationale_ratio_mean * report.rationale_ratio_mean;
  report.rationale_ratio_std = std::sqrt(var > 0.0 ? var : 0.0);
  for (Index c = 0; c < spec.classes; ++c) {
    const long total = class_total[static_cast<std::size_t>(c)];
    report.per_class_accuracy.push_back(
        total > 0 ? static_cast<double>(class_correct[static_cast<std::size_t>(c)]) / total : 0.0);
  }
  if (have_truth) {
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    report.recovery_precision = p;
    report.recovery_recall = r;
    report.recovery_f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return report;
}

Prf recovery_prf(const std::vector<std::uint8_t>& mask,
                 const std::vector<std::uint8_t>& true_mask) {
  if (mask.size() != true_mask.size()) {
    throw std::invalid_argument("recovery_prf: mask length mismatch");
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool sel = mask[i] != 0;
    const bool tru = true_mask[i] != 0;
    if (sel && tru) ++tp;
    else if (sel && !tru) ++fp;
    else if (!sel && tru) ++fn;
  }
  Prf out;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace rekd

#include "rekd/sweep.hpp"

namespace rekd {

std::vector<SweepCell> sweep_ratio_accuracy(const TrainConfig& base, const BackboneSpec& arch,
                                            const Dataset& data,
                                            const std::vector<double>& p_targets,
                                            const std::vector<std::uint64_t>& seeds,
                                            const Teacher* teacher) {
  if (p_targets.empty()) throw ConfigError("sweep needs at least one p_target");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  if (base.regime == Regime::kCls) throw ConfigError("sweep applies to the re and rekd regimes");
  if (base.regime == Regime::kRekd && teacher == nullptr) {
    throw ConfigError("rekd sweep requires a teacher");
  }

  std::vector<SweepCell> cells;
  for (double p : p_targets) {
    SweepCell cell;
    cell.p_target = p;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.weights.p_target = p;
      cfg.seed = seed;
      try {
        const TrainResult result = base.regime == Regime::kRekd
                                       ? train_rekd(cfg, arch, data, *teacher)
                                       : train_re(cfg, arch, data);
        if (result.diverged) {
          throw std::runtime_error("diverged: " + result.divergence_note);
        }
        cell.accuracies.push_back(result.test_report.accuracy);
        cell.ratios.push_back(result.test_report.rationale_ratio_mean);
      } catch (const std::exception& e) {
        cell.errors.push_back("seed=" + std::to_string(seed) + ": " + e.what());
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace rekd
