#include "rekd/models.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace rekd {

namespace {

// Uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix fan_in_uniform(Rng& rng, Index rows, Index cols, Index fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix u = uniform_matrix(rng, rows, cols);
  return (2.0 * u.array() - 1.0) * bound;
}

struct ParamBuilder {
  std::vector<Parameter> params;
  Rng rng;
  std::uint64_t next_stream = 0;

  explicit ParamBuilder(Rng r) : rng(r) {}

  void weight(const std::string& name, Index rows, Index cols) {
    Rng stream = rng.fork(next_stream++);
    params.push_back({name, fan_in_uniform(stream, rows, cols, rows)});
  }
  void weight_fan(const std::string& name, Index rows, Index cols, Index fan) {
    Rng stream = rng.fork(next_stream++);
    params.push_back({name, fan_in_uniform(stream, rows, cols, fan)});
  }
  void zeros(const std::string& name, Index rows, Index cols) {
    ++next_stream;  // keep stream assignment stable across init kinds
    params.push_back({name, Matrix::Zero(rows, cols)});
  }
  void ones(const std::string& name, Index rows, Index cols) {
    ++next_stream;
    params.push_back({name, Matrix::Ones(rows, cols)});
  }
};

void build_mlp_trunk(ParamBuilder& b, const BackboneSpec& s) {
  Index in = 2 * s.embed_dim;  // per-feature row concatenated with the pooled mean
  for (int i = 0; i < s.depth; ++i) {
    b.weight("mlp." + std::to_string(i) + ".weight", in, s.width);
    b.zeros("mlp." + std::to_string(i) + ".bias", 1, s.width);
    in = s.width;
  }
}

void build_transformer_trunk(ParamBuilder& b, const BackboneSpec& s, bool with_summary) {
  const Index w = s.width;
  b.weight("embed.weight", s.embed_dim, w);
  b.zeros("embed.bias", 1, w);
  if (with_summary) b.weight_fan("summary", 1, w, w);
  b.weight_fan("pos", s.features + (with_summary ? 1 : 0), w, w);
  for (int i = 0; i < s.depth; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    b.ones(p + "ln1.gamma", 1, w);
    b.zeros(p + "ln1.beta", 1, w);
    b.weight(p + "attn.wq", w, w);
    b.weight(p + "attn.wk", w, w);
    b.weight(p + "attn.wv", w, w);
    b.weight(p + "attn.wo", w, w);
    b.ones(p + "ln2.gamma", 1, w);
    b.zeros(p + "ln2.beta", 1, w);
    b.weight(p + "ffn.w1", w, 2 * w);
    b.zeros(p + "ffn.b1", 1, 2 * w);
    b.weight(p + "ffn.w2", 2 * w, w);
    b.zeros(p + "ffn.b2", 1, w);
  }
  b.ones("final_norm.gamma", 1, w);
  b.zeros("final_norm.beta", 1, w);
}

std::vector<Parameter> build_params(const BackboneSpec& s, Index head_out,
                                    bool with_summary, Rng rng) {
  ParamBuilder b(rng);
  if (s.kind == Backbone::kPerFeatureMlp)
    build_mlp_trunk(b, s);
  else
    build_transformer_trunk(b, s, with_summary);
  b.weight("head.weight", s.width, head_out);
  b.zeros("head.bias", 1, head_out);
  return std::move(b.params);
}

Var layer_norm(const BoundNet& net, const std::string& prefix, Var h) {
  const Index w = h.cols();
  Var mu = row_mean(h);
  Var xc = sub(h, broadcast_col(mu, w));
  Var var = row_mean(mul(xc, xc));
  Var s = inv_sqrt(add_scalar(var, 1e-5));
  Var xn = mul(xc, broadcast_col(s, w));
  const Index rows = h.rows();
  return add(mul(xn, broadcast_row(net.at(prefix + ".gamma"), rows)),
             broadcast_row(net.at(prefix + ".beta"), rows));
}

Var multi_head_attention(const BoundNet& net, const std::string& prefix, Var a, int heads) {
  Var q = matmul(a, net.at(prefix + ".wq"));
  Var k = matmul(a, net.at(prefix + ".wk"));
  Var v = matmul(a, net.at(prefix + ".wv"));
  const Index dh = q.cols() / heads;
  Var merged;
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var oh = matmul(row_softmax(scores, 1.0), vh);
    merged = h == 0 ? oh : hcat(merged, oh);
  }
  return matmul(merged, net.at(prefix + ".wo"));
}

Var mlp_trunk(const BoundNet& net, Var x) {
  const BackboneSpec& s = net.net->spec();
  const Index rows = x.rows();
  Var h = hcat(x, broadcast_row(col_mean(x), rows));
  for (int i = 0; i < s.depth; ++i) {
    const std::string p = "mlp." + std::to_string(i) + ".";
    h = tanh(add(matmul(h, net.at(p + "weight")), broadcast_row(net.at(p + "bias"), rows)));
  }
  return h;
}

Var transformer_trunk(const BoundNet& net, Var x, bool with_summary) {
  const BackboneSpec& s = net.net->spec();
  Var h = add(matmul(x, net.at("embed.weight")),
              broadcast_row(net.at("embed.bias"), x.rows()));
  if (with_summary) h = vcat(net.at("summary"), h);
  h = add(h, net.at("pos"));
  for (int i = 0; i < s.depth; ++i) {
    const std::string p = "block" + std::to_string(i);
    Var a = layer_norm(net, p + ".ln1", h);
    h = add(h, multi_head_attention(net, p + ".attn", a, s.heads));
    Var f = layer_norm(net, p + ".ln2", h);
    const Index rows = f.rows();
    Var ff = add(matmul(tanh(add(matmul(f, net.at(p + ".ffn.w1")),
                                 broadcast_row(net.at(p + ".ffn.b1"), rows))),
                        net.at(p + ".ffn.w2")),
                 broadcast_row(net.at(p + ".ffn.b2"), rows));
    h = add(h, ff);
  }
  return layer_norm(net, "final_norm", h);
}

void check_input(const BackboneSpec& s, Var x, const char* who) {
  if (x.rows() != s.features || x.cols() != s.embed_dim)
    throw std::invalid_argument(std::string(who) + ": input must be " +
                                std::to_string(s.features) + "x" +
                                std::to_string(s.embed_dim) + ", got " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

}  // namespace

Backbone backbone_from_string(const std::string& name) {
  if (name == "mlp") return Backbone::kPerFeatureMlp;
  if (name == "transformer") return Backbone::kTinyTransformer;
  throw ConfigError("unknown backbone '" + name + "' (expected mlp or transformer)");
}

std::string to_string(Backbone kind) {
  return kind == Backbone::kPerFeatureMlp ? "mlp" : "transformer";
}

void BackboneSpec::validate() const {
  if (depth < 1) throw ConfigError("backbone depth must be >= 1");
  if (width < 1) throw ConfigError("backbone width must be >= 1");
  if (features < 1 || embed_dim < 1) throw ConfigError("backbone input dims must be >= 1");
  if (classes < 2) throw ConfigError("backbone needs at least two classes");
  if (kind == Backbone::kTinyTransformer) {
    if (heads < 1) throw ConfigError("transformer heads must be >= 1");
    if (width % heads != 0) throw ConfigError("transformer width must be divisible by heads");
  }
}

std::size_t Net::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::uint64_t Net::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a over parameter bytes in order
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (const auto& p : params_) {
    feed(p.name.data(), p.name.size());
    feed(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  return h;
}

void Net::assign(const std::vector<Parameter>& source) {
  if (source.size() != params_.size())
    throw std::invalid_argument("Net::assign: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (source[i].name != params_[i].name)
      throw std::invalid_argument("Net::assign: parameter order mismatch at '" +
                                  source[i].name + "' (expected '" + params_[i].name + "')");
    if (source[i].value.rows() != params_[i].value.rows() ||
        source[i].value.cols() != params_[i].value.cols())
      throw std::invalid_argument("Net::assign: shape mismatch for '" + source[i].name + "'");
    params_[i].value = source[i].value;
  }
}

GeneratorNet GeneratorNet::init(const BackboneSpec& spec, Rng rng) {
  spec.validate();
  GeneratorNet net;
  net.spec_ = spec;
  net.params_ = build_params(spec, 2, /*with_summary=*/false, rng);
  return net;
}

PredictorNet PredictorNet::init(const BackboneSpec& spec, Rng rng) {
  spec.validate();
  PredictorNet net;
  net.spec_ = spec;
  net.params_ = build_params(spec, spec.classes,
                             /*with_summary=*/spec.kind == Backbone::kTinyTransformer, rng);
  return net;
}

Var BoundNet::at(const std::string& name) const {
  if (!net) throw std::logic_error("BoundNet: not bound");
  for (std::size_t i = 0; i < net->params().size(); ++i)
    if (net->params()[i].name == name) return vars[i];
  throw std::invalid_argument("BoundNet: no parameter named '" + name + "'");
}

BoundNet bind_trainable(Tape& tape, const Net& net) {
  BoundNet b;
  b.net = &net;
  b.vars.reserve(net.params().size());
  for (const auto& p : net.params()) b.vars.push_back(tape.leaf(p.value));
  return b;
}

BoundNet bind_frozen(Tape& tape, const Net& net) {
  BoundNet b;
  b.net = &net;
  b.vars.reserve(net.params().size());
  for (const auto& p : net.params()) b.vars.push_back(tape.constant(p.value));
  return b;
}

Var generator_forward(Tape&, const BoundNet& gen, Var x) {
  const BackboneSpec& s = gen.net->spec();
  check_input(s, x, "generator_forward");
  Var h = s.kind == Backbone::kPerFeatureMlp ? mlp_trunk(gen, x)
                                             : transformer_trunk(gen, x, false);
  return add(matmul(h, gen.at("head.weight")), broadcast_row(gen.at("head.bias"), s.features));
}

Var predictor_forward(Tape&, const BoundNet& pred, Var rationale) {
  const BackboneSpec& s = pred.net->spec();
  check_input(s, rationale, "predictor_forward");
  Var pooled;
  if (s.kind == Backbone::kPerFeatureMlp) {
    pooled = col_mean(mlp_trunk(pred, rationale));
  } else {
    Var h = transformer_trunk(pred, rationale, true);
    pooled = slice_rows(h, 0, 1);  // the prepended summary position
  }
  return add(matmul(pooled, pred.at("head.weight")), pred.at("head.bias"));
}

Var apply_mask(Var x, Var mask) { return mask_rows(x, mask); }

ReForward re_forward(Tape& tape, const BoundNet& gen, const BoundNet& pred,
                     const Matrix& x, const Matrix& noise, double tau,
                     SelectionMode mode) {
  ReForward out;
  Var xv = tape.constant(x);
  out.logits = generator_forward(tape, gen, xv);
  out.sample = gumbel_softmax(out.logits, noise, tau);
  out.mask = mode == SelectionMode::kStraightThrough ? discretize_st(out.sample)
                                                     : soft_mask(out.sample);
  out.rationale = apply_mask(xv, out.mask);
  out.pred_logits = predictor_forward(tape, pred, out.rationale);
  return out;
}

}  // namespace rekd
