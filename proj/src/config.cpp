#include "rekd/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace rekd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long parse_long(const std::string& s) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return value;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return value;
}

double parse_double(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("expected a number, got ''");
  char* end = nullptr;
  const double value = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return value;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct KeyHandler {
  const char* name;
  std::function<void(ResolvedConfig&, const std::string&)> set;
  std::function<std::string(const ResolvedConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = {
      {"L",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.features = parse_long(v);
         c.backbone.features = c.dataset.features;
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.features)); }},
      {"D",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.embed_dim = parse_long(v);
         c.backbone.embed_dim = c.dataset.embed_dim;
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.embed_dim)); }},
      {"C",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.classes = parse_long(v);
         c.backbone.classes = c.dataset.classes;
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.classes)); }},
      {"k_signal",
       [](ResolvedConfig& c, const std::string& v) { c.dataset.k_signal = parse_long(v); },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.k_signal)); }},
      {"n_train",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.n_train = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.n_train)); }},
      {"n_dev",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.n_dev = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.n_dev)); }},
      {"n_test",
       [](ResolvedConfig& c, const std::string& v) {
         c.dataset.n_test = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.dataset.n_test)); }},
      {"noise_std",
       [](ResolvedConfig& c, const std::string& v) { c.dataset.noise_std = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.dataset.noise_std); }},
      {"data_seed",
       [](ResolvedConfig& c, const std::string& v) { c.dataset.seed = parse_u64(v); },
       [](const ResolvedConfig& c) { return fmt(c.dataset.seed); }},

      {"arch",
       [](ResolvedConfig& c, const std::string& v) { c.backbone.kind = backbone_from_string(v); },
       [](const ResolvedConfig& c) { return to_string(c.backbone.kind); }},
      {"depth",
       [](ResolvedConfig& c, const std::string& v) {
         c.backbone.depth = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.backbone.depth)); }},
      {"width",
       [](ResolvedConfig& c, const std::string& v) {
         c.backbone.width = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.backbone.width)); }},
      {"heads",
       [](ResolvedConfig& c, const std::string& v) {
         c.backbone.heads = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.backbone.heads)); }},

      {"alpha",
       [](ResolvedConfig& c, const std::string& v) { c.train.weights.alpha = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.weights.alpha); }},
      {"lambda_r",
       [](ResolvedConfig& c, const std::string& v) { c.train.weights.lambda_r = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.weights.lambda_r); }},
      {"lambda_select",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.weights.lambda_select = parse_double(v);
       },
       [](const ResolvedConfig& c) { return fmt(c.train.weights.lambda_select); }},
      {"p_target",
       [](ResolvedConfig& c, const std::string& v) { c.train.weights.p_target = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.weights.p_target); }},

      {"tau0",
       [](ResolvedConfig& c, const std::string& v) { c.train.schedule.tau0 = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.schedule.tau0); }},
      {"tau_final",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.schedule.tau_final = parse_double(v);
       },
       [](const ResolvedConfig& c) { return fmt(c.train.schedule.tau_final); }},
      {"anneal_steps",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.schedule.total_steps = parse_long(v);
       },
       [](const ResolvedConfig& c) { return fmt(c.train.schedule.total_steps); }},
      {"anneal_every",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.schedule.anneal_every = parse_long(v);
       },
       [](const ResolvedConfig& c) { return fmt(c.train.schedule.anneal_every); }},

      {"epochs",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.epochs = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.train.epochs)); }},
      {"batch_size",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.batch_size = static_cast<int>(parse_long(v));
       },
       [](const ResolvedConfig& c) { return fmt(static_cast<long>(c.train.batch_size)); }},
      {"lr", [](ResolvedConfig& c, const std::string& v) { c.train.lr = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.lr); }},
      {"weight_decay",
       [](ResolvedConfig& c, const std::string& v) { c.train.weight_decay = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.weight_decay); }},
      {"adam_beta1",
       [](ResolvedConfig& c, const std::string& v) { c.train.adam_beta1 = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.adam_beta1); }},
      {"adam_beta2",
       [](ResolvedConfig& c, const std::string& v) { c.train.adam_beta2 = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.adam_beta2); }},
      {"adam_eps",
       [](ResolvedConfig& c, const std::string& v) { c.train.adam_eps = parse_double(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.adam_eps); }},

      {"seed", [](ResolvedConfig& c, const std::string& v) { c.train.seed = parse_u64(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.seed); }},
      {"teacher",
       [](ResolvedConfig& c, const std::string& v) { c.train.teacher_checkpoint = v; },
       [](const ResolvedConfig& c) { return c.train.teacher_checkpoint; }},
      {"share_gumbel_noise",
       [](ResolvedConfig& c, const std::string& v) {
         c.train.share_gumbel_noise = parse_bool(v);
       },
       [](const ResolvedConfig& c) { return fmt(c.train.share_gumbel_noise); }},
      {"record_seconds",
       [](ResolvedConfig& c, const std::string& v) { c.train.record_seconds = parse_bool(v); },
       [](const ResolvedConfig& c) { return fmt(c.train.record_seconds); }},
  };
  return table;
}

void apply(ResolvedConfig& cfg, const KeyValues& values) {
  for (const auto& [key, value] : values) {
    const KeyHandler* found = nullptr;
    for (const KeyHandler& h : handlers()) {
      if (key == h.name) {
        found = &h;
        break;
      }
    }
    if (found == nullptr) throw ConfigError("unknown key '" + key + "'");
    try {
      found->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
  }
}

}  // namespace

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

KeyValues parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

KeyValues ResolvedConfig::echo() const {
  KeyValues out;
  for (const KeyHandler& h : handlers()) out[h.name] = h.get(*this);
  return out;
}

ResolvedConfig resolve_config(const KeyValues& file_values, const KeyValues& overrides) {
  ResolvedConfig cfg;
  apply(cfg, file_values);
  apply(cfg, overrides);
  cfg.dataset.validate();
  cfg.backbone.validate();
  cfg.train.validate();
  if (cfg.backbone.features != cfg.dataset.features ||
      cfg.backbone.embed_dim != cfg.dataset.embed_dim ||
      cfg.backbone.classes != cfg.dataset.classes) {
    throw ConfigError("model and dataset dimensions disagree");
  }
  return cfg;
}

std::string render_config(const KeyValues& values) {
  std::string out;
  for (const auto& [key, value] : values) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace rekd
