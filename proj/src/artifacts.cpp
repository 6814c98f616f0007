#include "rekd/artifacts.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rekd {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string cell(const std::optional<double>& v) { return v.has_value() ? num(*v) : ""; }

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

json report_to_json(const EvalReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["rationale_ratio"] = json{{"mean", r.rationale_ratio_mean}, {"std", r.rationale_ratio_std}};
  if (r.recovery_precision.has_value()) {
    j["recovery"] = json{{"precision", *r.recovery_precision},
                         {"recall", *r.recovery_recall},
                         {"f1", *r.recovery_f1}};
  } else {
    j["recovery"] = nullptr;
  }
  j["per_class_accuracy"] = r.per_class_accuracy;
  return j;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "epoch,step,tau,loss_total,loss_pred,loss_select,loss_kd_r,loss_kd_y,"
      "dev_loss_re,dev_loss_pred,dev_accuracy,rationale_ratio,seconds\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.step) + ',' + cell(r.tau) + ',' +
           num(r.loss_total) + ',' + num(r.loss_pred) + ',' + cell(r.loss_select) + ',' +
           cell(r.loss_kd_r) + ',' + cell(r.loss_kd_y) + ',' + cell(r.dev_loss_re) + ',' +
           num(r.dev_loss_pred) + ',' + num(r.dev_accuracy) + ',' + cell(r.rationale_ratio) +
           ',' + cell(r.seconds) + '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out =
      "p_target,seeds_ok,accuracy_mean,accuracy_std,ratio_mean,ratio_std,errors\n";
  for (const SweepCell& c : cells) {
    std::string errors;
    for (const std::string& e : c.errors) {
      if (!errors.empty()) errors += "; ";
      errors += e;
    }
    out += num(c.p_target) + ',' + std::to_string(c.accuracies.size()) + ',' +
           num(c.acc_mean()) + ',' + num(c.acc_std()) + ',' + num(c.ratio_mean()) + ',' +
           num(c.ratio_std()) + ',' + csv_quote(errors) + '\n';
  }
  return out;
}

std::string eval_report_json(const EvalReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_run_dir(const std::filesystem::path& run_dir, const ResolvedConfig& cfg,
                   Regime regime, const TrainResult& result, double wall_seconds) {
  std::filesystem::create_directories(run_dir);
  const KeyValues echo = cfg.echo();
  write_text_file(run_dir / "config.txt", render_config(echo));
  write_text_file(run_dir / "metrics.csv", metrics_csv(result.metrics));

  auto to_ckpt = [&](const ModelSnapshot& snap) {
    Checkpoint ckpt;
    ckpt.regime = to_string(regime);
    ckpt.generator = snap.generator;
    ckpt.predictor = snap.predictor;
    ckpt.config_echo = echo;
    ckpt.dev_criterion = snap.dev_criterion;
    ckpt.run_seed = cfg.train.seed;
    return ckpt;
  };
  save_checkpoint(run_dir / "init.ckpt", to_ckpt(result.init));
  if (result.best.has_value()) save_checkpoint(run_dir / "best.ckpt", to_ckpt(*result.best));
  if (result.last.has_value()) save_checkpoint(run_dir / "last.ckpt", to_ckpt(*result.last));

  json summary;
  summary["regime"] = to_string(regime);
  summary["seed"] = cfg.train.seed;
  summary["epochs_run"] = result.metrics.size();
  summary["best_epoch"] = result.best_epoch;
  if (result.best.has_value()) {
    summary["best_dev_criterion"] = result.best->dev_criterion;
  } else {
    summary["best_dev_criterion"] = nullptr;
  }
  summary["diverged"] = result.diverged;
  summary["divergence_note"] = result.divergence_note;
  // An empty per-class table means the test split was never evaluated.
  if (result.test_report.per_class_accuracy.empty()) {
    summary["test"] = nullptr;
  } else {
    summary["test"] = report_to_json(result.test_report);
  }
  summary["wall_seconds"] = wall_seconds;
  write_text_file(run_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace rekd
