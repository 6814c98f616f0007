#pragma once

#include "rekd/models.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace rekd {

inline constexpr int kCheckpointFormatVersion = 1;

// Everything needed to restore a trained model: architecture, parameters,
// the resolved config echo, the selection criterion it scored, and the run
// seed. The generator is absent for pure classifiers.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string regime;
  std::optional<GeneratorNet> generator;
  PredictorNet predictor;
  std::map<std::string, std::string> config_echo;
  double dev_criterion = 0.0;
  std::uint64_t run_seed = 0;
};

// JSON on disk. Doubles round-trip exactly (shortest representation that
// parses back to the same value).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// ConfigError on missing file, malformed JSON, shape mismatch, or an
// unsupported format version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rekd
