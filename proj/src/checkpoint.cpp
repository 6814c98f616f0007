#include "rekd/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace rekd {

namespace {

using nlohmann::json;

json spec_to_json(const BackboneSpec& spec) {
  return json{{"kind", to_string(spec.kind)},
              {"depth", spec.depth},
              {"width", spec.width},
              {"heads", spec.heads},
              {"features", spec.features},
              {"embed_dim", spec.embed_dim},
              {"classes", spec.classes}};
}

BackboneSpec spec_from_json(const json& j) {
  BackboneSpec spec;
  spec.kind = backbone_from_string(j.at("kind").get<std::string>());
  spec.depth = j.at("depth").get<int>();
  spec.width = j.at("width").get<int>();
  spec.heads = j.at("heads").get<int>();
  spec.features = j.at("features").get<Index>();
  spec.embed_dim = j.at("embed_dim").get<Index>();
  spec.classes = j.at("classes").get<Index>();
  spec.validate();
  return spec;
}

json net_to_json(const Net& net) {
  json params = json::array();
  for (const Parameter& p : net.params()) {
    // Row-major flattening matches the in-memory layout.
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    params.push_back(json{{"name", p.name},
                          {"rows", p.value.rows()},
                          {"cols", p.value.cols()},
                          {"data", std::move(data)}});
  }
  return json{{"spec", spec_to_json(net.spec())}, {"params", std::move(params)}};
}

std::vector<Parameter> params_from_json(const json& j) {
  std::vector<Parameter> out;
  for (const json& pj : j.at("params")) {
    Parameter p;
    p.name = pj.at("name").get<std::string>();
    const Index rows = pj.at("rows").get<Index>();
    const Index cols = pj.at("cols").get<Index>();
    const auto data = pj.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) {
      throw ConfigError("parameter '" + p.name + "' has " + std::to_string(data.size()) +
                        " values for shape [" + std::to_string(rows) + "," +
                        std::to_string(cols) + "]");
    }
    p.value = Eigen::Map<const Matrix>(data.data(), rows, cols);
    out.push_back(std::move(p));
  }
  return out;
}

template <class NetT>
NetT net_from_json(const json& j) {
  const BackboneSpec spec = spec_from_json(j.at("spec"));
  NetT net = NetT::init(spec, Rng(0));
  net.assign(params_from_json(j));
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format_version"] = ckpt.format_version;
  j["regime"] = ckpt.regime;
  if (ckpt.generator.has_value()) j["generator"] = net_to_json(*ckpt.generator);
  j["predictor"] = net_to_json(ckpt.predictor);
  j["config"] = ckpt.config_echo;
  j["dev_criterion"] = ckpt.dev_criterion;
  j["run_seed"] = ckpt.run_seed;

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint '" + path.string() + "'");
  try {
    const json j = json::parse(in);
    Checkpoint ckpt;
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version != kCheckpointFormatVersion) {
      throw ConfigError("checkpoint '" + path.string() + "' has format version " +
                        std::to_string(ckpt.format_version) + ", expected " +
                        std::to_string(kCheckpointFormatVersion));
    }
    ckpt.regime = j.at("regime").get<std::string>();
    if (j.contains("generator")) {
      ckpt.generator = net_from_json<GeneratorNet>(j.at("generator"));
    }
    ckpt.predictor = net_from_json<PredictorNet>(j.at("predictor"));
    if (j.contains("config")) {
      ckpt.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    }
    ckpt.dev_criterion = j.at("dev_criterion").get<double>();
    ckpt.run_seed = j.at("run_seed").get<std::uint64_t>();
    return ckpt;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace rekd
