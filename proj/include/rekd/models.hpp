#pragma once

#include "rekd/gumbel.hpp"
#include "rekd/ops.hpp"
#include "rekd/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rekd {

enum class Backbone { kPerFeatureMlp, kTinyTransformer };

Backbone backbone_from_string(const std::string& name);  // ConfigError on unknown
std::string to_string(Backbone kind);

// Architecture shared by generator and predictor; only the heads differ.
// features = rows per sample (L), embed_dim = columns (D), classes = C.
struct BackboneSpec {
  Backbone kind = Backbone::kPerFeatureMlp;
  int depth = 2;
  int width = 32;
  int heads = 4;  // transformer only; must divide width
  Index features = 40;
  Index embed_dim = 8;
  Index classes = 4;

  void validate() const;
  bool operator==(const BackboneSpec&) const = default;
};

struct Parameter {
  std::string name;
  Matrix value;
};

// Parameter plumbing common to the two nets. Parameter order is the
// declaration order used at init time and is what checkpoints persist.
class Net {
 public:
  const BackboneSpec& spec() const { return spec_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }
  std::size_t scalar_count() const;
  // Order-sensitive digest over parameter bytes; for immutability checks.
  std::uint64_t checksum() const;
  // Overwrites values from `source`, which must match in names and shapes.
  void assign(const std::vector<Parameter>& source);

 protected:
  Net() = default;
  BackboneSpec spec_;
  std::vector<Parameter> params_;
};

class GeneratorNet : public Net {
 public:
  static GeneratorNet init(const BackboneSpec& spec, Rng rng);
};

class PredictorNet : public Net {
 public:
  static PredictorNet init(const BackboneSpec& spec, Rng rng);
};

// Tape-bound view of a net: one Var per parameter, aligned with params().
struct BoundNet {
  const Net* net = nullptr;
  std::vector<Var> vars;
  Var at(const std::string& name) const;  // std::invalid_argument on miss
};

BoundNet bind_trainable(Tape& tape, const Net& net);
BoundNet bind_frozen(Tape& tape, const Net& net);

// Selection logits Z [L,2] from the raw input. The generator always sees the
// unmasked input.
Var generator_forward(Tape& tape, const BoundNet& gen, Var x);

// Class logits Q [1,C] from a (masked) input. Masking happens before the
// predictor adds any positional information or summary token, so rows the
// mask dropped cannot influence Q.
Var predictor_forward(Tape& tape, const BoundNet& pred, Var rationale);

// Row l kept iff mask(l)==1; dropped rows are exact zeros.
Var apply_mask(Var x, Var mask);

enum class SelectionMode {
  kStraightThrough,  // hard argmax mask, straight-through gradients
  kSoft              // S[:,1] as the mask; used by the finite-difference oracle
};

// One sample through select -> mask -> predict.
struct ReForward {
  Var logits;       // Z [L,2]
  GumbelSample sample;
  Var mask;         // [L,1]
  Var rationale;    // [L,D]
  Var pred_logits;  // Q [1,C]
};

ReForward re_forward(Tape& tape, const BoundNet& gen, const BoundNet& pred,
                     const Matrix& x, const Matrix& noise, double tau,
                     SelectionMode mode = SelectionMode::kStraightThrough);

}  // namespace rekd
