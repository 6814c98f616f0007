#include "rekd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "rekd/artifacts.hpp"
#include "rekd/checkpoint.hpp"
#include "rekd/config.hpp"
#include "rekd/gradcheck_suite.hpp"
#include "rekd/sweep.hpp"
#include "rekd/training.hpp"

namespace rekd {

namespace {

constexpr const char* kUsage = R"(usage: rekd <command> [flags]

commands:
  gen-data       write train/dev/test tables for the planted-rationale task
  train-cls      train a plain classifier on the full input
  train-re       train the select-predict pair (generator + predictor)
  train-student  train a student against a frozen teacher checkpoint
  eval           evaluate a checkpoint on a data table, print JSON
  sweep          train across p_target values and seeds, write sweep.csv
  gradcheck      run the finite-difference and gradient-identity suites

common flags:
  --config PATH     key = value settings file
  --out DIR         output directory (runs and generated data)
  --data DIR|FILE   data tables directory (training) or one table (eval)
  --teacher PATH    teacher checkpoint (train-student, rekd sweep)
  --checkpoint PATH checkpoint to evaluate
  --regime NAME     sweep regime: re (default) or rekd
  --p-targets LIST  comma-separated p_target values for sweep
  --seeds LIST      comma-separated seeds for sweep
  --tau VALUE       evaluation temperature (eval)
  --sampled         evaluate with sampled Gumbel noise instead of G = 0
  --<key> VALUE     override any config key (e.g. --alpha 0.5 --epochs 10)
)";

struct ParsedArgs {
  std::string command;
  std::map<std::string, std::string> special;
  KeyValues overrides;
  bool sampled = false;
};

const std::set<std::string>& special_flags() {
  static const std::set<std::string> flags = {"config", "out",   "data",  "checkpoint",
                                              "regime", "p-targets", "seeds", "tau"};
  return flags;
}

ParsedArgs parse_args(const std::vector<std::string>& args) {
  ParsedArgs out;
  out.command = args.front();
  std::size_t i = 1;
  while (i < args.size()) {
    const std::string& token = args[i];
    if (token.rfind("--", 0) != 0) {
      throw ConfigError("unexpected argument '" + token + "' (flags start with --)");
    }
    std::string name = token.substr(2);
    std::string value;
    bool has_value = false;
    const auto eq = name.find('=');
    if (eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
      has_value = true;
    }
    if (name == "sampled" && !has_value) {
      out.sampled = true;
      ++i;
      continue;
    }
    if (!has_value) {
      if (i + 1 >= args.size()) throw ConfigError("flag '--" + name + "' needs a value");
      value = args[i + 1];
      i += 2;
    } else {
      ++i;
    }
    if (special_flags().count(name) != 0) {
      out.special[name] = value;
    } else {
      out.overrides[name] = value;
    }
  }
  return out;
}

std::string require_flag(const ParsedArgs& args, const std::string& name) {
  const auto it = args.special.find(name);
  if (it == args.special.end() || it->second.empty()) {
    throw ConfigError(args.command + " requires --" + name);
  }
  return it->second;
}

ResolvedConfig resolve_from(const ParsedArgs& args) {
  KeyValues file_values;
  const auto it = args.special.find("config");
  if (it != args.special.end()) file_values = parse_config_file(it->second);
  return resolve_config(file_values, args.overrides);
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string part =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      const double v = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("flag '--" + flag + "': cannot parse '" + part + "' as a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& flag) {
  std::vector<std::uint64_t> out;
  for (double v : parse_double_list(text, flag)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
      throw ConfigError("flag '--" + flag + "': seeds must be non-negative integers");
    }
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

Dataset load_or_generate(const ParsedArgs& args, const ResolvedConfig& cfg) {
  const auto it = args.special.find("data");
  if (it == args.special.end()) return gen_planted(cfg.dataset);
  const std::filesystem::path dir = it->second;
  Dataset data;
  data.train = load_table(dir / "train.txt", cfg.dataset.features, cfg.dataset.embed_dim,
                          cfg.dataset.classes);
  data.dev = load_table(dir / "dev.txt", cfg.dataset.features, cfg.dataset.embed_dim,
                        cfg.dataset.classes);
  data.test = load_table(dir / "test.txt", cfg.dataset.features, cfg.dataset.embed_dim,
                         cfg.dataset.classes);
  return data;
}

Teacher load_teacher(const std::string& path, const BackboneSpec& student_arch) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.generator.has_value()) {
    throw ConfigError("teacher checkpoint '" + path + "' has no generator (regime " +
                      ckpt.regime + ")");
  }
  Teacher teacher{std::move(*ckpt.generator), std::move(ckpt.predictor)};
  if (teacher.predictor.spec().classes != student_arch.classes) {
    throw ConfigError("teacher checkpoint '" + path + "' predicts " +
                      std::to_string(teacher.predictor.spec().classes) +
                      " classes, student needs " + std::to_string(student_arch.classes));
  }
  return teacher;
}

int finish_training(const ParsedArgs& args, const ResolvedConfig& cfg, Regime regime,
                    const TrainResult& result, double wall_seconds) {
  const std::string out_dir = require_flag(args, "out");
  write_run_dir(out_dir, cfg, regime, result, wall_seconds);
  if (result.diverged) {
    std::cerr << "error: training diverged: " << result.divergence_note << "\n";
    return 2;
  }
  std::cout << "run dir: " << out_dir << "\n"
            << "best epoch: " << result.best_epoch;
  if (result.best.has_value()) {
    std::cout << " (dev criterion " << result.best->dev_criterion << ")";
  }
  std::cout << "\ntest accuracy: " << result.test_report.accuracy
            << ", rationale ratio: " << result.test_report.rationale_ratio_mean << "\n";
  return 0;
}

int cmd_gen_data(const ParsedArgs& args) {
  const std::filesystem::path out_dir = require_flag(args, "out");
  const ResolvedConfig cfg = resolve_from(args);
  const Dataset data = gen_planted(cfg.dataset);
  std::filesystem::create_directories(out_dir);
  save_table(out_dir / "train.txt", data.train, cfg.dataset.features, cfg.dataset.embed_dim,
             cfg.dataset.classes);
  save_table(out_dir / "dev.txt", data.dev, cfg.dataset.features, cfg.dataset.embed_dim,
             cfg.dataset.classes);
  save_table(out_dir / "test.txt", data.test, cfg.dataset.features, cfg.dataset.embed_dim,
             cfg.dataset.classes);
  write_text_file(out_dir / "config.txt", render_config(cfg.echo()));
  std::cout << "wrote " << data.train.size() << "/" << data.dev.size() << "/"
            << data.test.size() << " train/dev/test samples to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const ParsedArgs& args, Regime regime) {
  ResolvedConfig cfg = resolve_from(args);
  cfg.train.regime = regime;
  cfg.train.validate();
  const Dataset data = load_or_generate(args, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  switch (regime) {
    case Regime::kCls:
      result = train_cls(cfg.train, cfg.backbone, data);
      break;
    case Regime::kRe:
      result = train_re(cfg.train, cfg.backbone, data);
      break;
    case Regime::kRekd: {
      const Teacher teacher = load_teacher(cfg.train.teacher_checkpoint, cfg.backbone);
      result = train_rekd(cfg.train, cfg.backbone, data, teacher);
      break;
    }
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_training(args, cfg, regime, result, wall);
}

int cmd_eval(const ParsedArgs& args) {
  const std::string ckpt_path = require_flag(args, "checkpoint");
  const std::string data_path = require_flag(args, "data");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const BackboneSpec& spec = ckpt.predictor.spec();
  const std::vector<Sample> samples =
      load_table(data_path, spec.features, spec.embed_dim, spec.classes);

  EvalOptions opts;
  opts.sampled = args.sampled;
  const auto tau_it = args.special.find("tau");
  if (tau_it != args.special.end()) {
    try {
      std::size_t used = 0;
      opts.tau_eval = std::stod(tau_it->second, &used);
      if (used != tau_it->second.size()) throw std::invalid_argument(tau_it->second);
    } catch (const std::exception&) {
      throw ConfigError("flag '--tau': cannot parse '" + tau_it->second + "' as a number");
    }
    if (!(opts.tau_eval > 0.0)) throw ConfigError("flag '--tau': must be > 0");
  }

  const GeneratorNet* gen = ckpt.generator.has_value() ? &*ckpt.generator : nullptr;
  const EvalReport report = evaluate(gen, ckpt.predictor, samples, opts);
  const std::string json_text = eval_report_json(report);
  std::cout << json_text;
  const auto out_it = args.special.find("out");
  if (out_it != args.special.end()) {
    std::filesystem::create_directories(out_it->second);
    write_text_file(std::filesystem::path(out_it->second) / "report.json", json_text);
  }
  return 0;
}

int cmd_sweep(const ParsedArgs& args) {
  const std::filesystem::path out_dir = require_flag(args, "out");
  ResolvedConfig cfg = resolve_from(args);
  const auto regime_it = args.special.find("regime");
  cfg.train.regime =
      regime_from_string(regime_it == args.special.end() ? "re" : regime_it->second);
  if (cfg.train.regime == Regime::kCls) {
    throw ConfigError("sweep applies to the re and rekd regimes");
  }
  cfg.train.validate();

  std::vector<double> p_targets = {0.05, 0.15, 0.35, 0.75, 1.0};
  const auto p_it = args.special.find("p-targets");
  if (p_it != args.special.end()) p_targets = parse_double_list(p_it->second, "p-targets");
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  const auto s_it = args.special.find("seeds");
  if (s_it != args.special.end()) seeds = parse_seed_list(s_it->second, "seeds");

  const Dataset data = load_or_generate(args, cfg);
  Teacher teacher;
  const Teacher* teacher_ptr = nullptr;
  if (cfg.train.regime == Regime::kRekd) {
    teacher = load_teacher(cfg.train.teacher_checkpoint, cfg.backbone);
    teacher_ptr = &teacher;
  }

  const auto cells =
      sweep_ratio_accuracy(cfg.train, cfg.backbone, data, p_targets, seeds, teacher_ptr);
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "config.txt", render_config(cfg.echo()));
  write_text_file(out_dir / "sweep.csv", sweep_csv(cells));
  for (const SweepCell& cell : cells) {
    std::cout << "p_target " << cell.p_target << ": accuracy " << cell.acc_mean() << " (std "
              << cell.acc_std() << "), ratio " << cell.ratio_mean() << " over "
              << cell.accuracies.size() << " seeds";
    if (!cell.errors.empty()) std::cout << ", " << cell.errors.size() << " failed";
    std::cout << "\n";
  }
  std::cout << "wrote " << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_gradcheck(const ParsedArgs& args) {
  if (!args.overrides.empty() || !args.special.empty()) {
    throw ConfigError("gradcheck takes no flags");
  }
  const GradCheckReport report = run_gradcheck_suite(1e-4);
  for (const GradCheckEntry& e : report.entries) {
    std::printf("%-4s %-55s max rel err %.3e\n", e.passed ? "ok" : "FAIL", e.name.c_str(),
                e.max_rel_err);
  }
  std::printf("finite differences: worst %.3e over %zu checks\n", report.worst,
              report.entries.size());

  const auto identities = run_identity_checks({5.0, 1.0, 0.5, 0.1}, 100, 1);
  bool identity_ok = true;
  for (const IdentityEntry& e : identities) {
    const bool ok = e.max_abs_err < 1e-6 && e.max_ratio_err < 0.05;
    identity_ok = identity_ok && ok;
    std::printf("%-4s identity tau=%-4g grad err %.3e, scaling err %.3e (%d pairs)\n",
                ok ? "ok" : "FAIL", e.tau, e.max_abs_err, e.max_ratio_err, e.pairs);
  }
  const bool ok = report.all_passed && identity_ok;
  std::printf("gradcheck: %s\n", ok ? "all checks passed" : "FAILURES above");
  return ok ? 0 : 2;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  if (args.empty() || args.front() == "help" || args.front() == "--help") {
    std::cout << kUsage;
    return args.empty() ? 1 : 0;
  }
  try {
    const ParsedArgs parsed = parse_args(args);
    if (parsed.command == "gen-data") return cmd_gen_data(parsed);
    if (parsed.command == "train-cls") return cmd_train(parsed, Regime::kCls);
    if (parsed.command == "train-re") return cmd_train(parsed, Regime::kRe);
    if (parsed.command == "train-student") return cmd_train(parsed, Regime::kRekd);
    if (parsed.command == "eval") return cmd_eval(parsed);
    if (parsed.command == "sweep") return cmd_sweep(parsed);
    if (parsed.command == "gradcheck") return cmd_gradcheck(parsed);
    std::cerr << "error: unknown command '" << parsed.command << "'\n" << kUsage;
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rekd
