#pragma once

#include "rekd/data.hpp"
#include "rekd/models.hpp"
#include "rekd/training.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace rekd {

// Ordered key=value pairs; later assignments win.
using KeyValues = std::map<std::string, std::string>;

// Parses `key = value` lines. '#' starts a comment line, blank lines are
// skipped. origin labels error messages (file name or "--set").
KeyValues parse_config_text(const std::string& text, const std::string& origin);
KeyValues parse_config_file(const std::filesystem::path& path);

struct ResolvedConfig {
  TrainConfig train;
  BackboneSpec backbone;
  DatasetSpec dataset;

  // Every known key with its effective value, in canonical key order.
  KeyValues echo() const;
};

// defaults <- file_values <- overrides. Unknown keys, unparsable values, and
// out-of-range settings raise ConfigError naming the key. The regime is not
// a key; commands set it.
ResolvedConfig resolve_config(const KeyValues& file_values, const KeyValues& overrides);

// `key = value` lines in map order, suitable for parse_config_text.
std::string render_config(const KeyValues& values);

}  // namespace rekd
