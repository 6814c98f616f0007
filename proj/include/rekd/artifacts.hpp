#pragma once

#include "rekd/checkpoint.hpp"
#include "rekd/config.hpp"
#include "rekd/sweep.hpp"
#include "rekd/training.hpp"

#include <filesystem>
#include <string>

namespace rekd {

// Fixed column schema; optional fields render as empty cells. Doubles use
// the shortest representation that round-trips, so equal runs produce
// byte-equal files.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

std::string sweep_csv(const std::vector<SweepCell>& cells);

std::string eval_report_json(const EvalReport& report);

// Writes config.txt, metrics.csv, init.ckpt, best.ckpt/last.ckpt when
// present, and summary.json under run_dir (created if needed).
void write_run_dir(const std::filesystem::path& run_dir, const ResolvedConfig& cfg,
                   Regime regime, const TrainResult& result, double wall_seconds);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rekd
