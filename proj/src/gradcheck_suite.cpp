#include "rekd/gradcheck_suite.hpp"

#include <cmath>

#include "rekd/grad_check.hpp"
#include "rekd/losses.hpp"
#include "rekd/models.hpp"

namespace rekd {

namespace {

BoundNet bind_with_substitute(Tape& tape, const Net& net, const std::string& target, Var sub) {
  BoundNet bound;
  bound.net = &net;
  for (const Parameter& p : net.params()) {
    bound.vars.push_back(p.name == target ? sub : tape.constant(p.value));
  }
  return bound;
}

struct Fixture {
  std::string label;
  BackboneSpec arch;
  GeneratorNet gen, teacher_gen;
  PredictorNet pred, teacher_pred;
  Matrix x, noise;
  Matrix teacher_soft, teacher_logits;  // values, held constant in the losses
  Index class_label = 1;
  double tau = 0.7;
  LossWeights weights;
};

Fixture make_fixture(Backbone kind, std::uint64_t seed) {
  Fixture f;
  f.arch.kind = kind;
  f.arch.depth = 1;
  f.arch.width = 8;
  f.arch.heads = 2;
  f.arch.features = 5;
  f.arch.embed_dim = 4;
  f.arch.classes = 3;
  f.label = to_string(kind);
  f.weights.p_target = 0.35;

  Rng root(seed);
  f.gen = GeneratorNet::init(f.arch, root.fork(1));
  f.pred = PredictorNet::init(f.arch, root.fork(2));
  f.teacher_gen = GeneratorNet::init(f.arch, root.fork(3));
  f.teacher_pred = PredictorNet::init(f.arch, root.fork(4));
  Rng data_rng = root.fork(5);
  f.x = gaussian_matrix(data_rng, f.arch.features, f.arch.embed_dim);
  Rng noise_rng = root.fork(6);
  f.noise = sample_noise(noise_rng, f.arch.features);

  Tape tape;
  BoundNet tg = bind_frozen(tape, f.teacher_gen);
  BoundNet tp = bind_frozen(tape, f.teacher_pred);
  ReForward tf = re_forward(tape, tg, tp, f.x, f.noise, f.tau,
                            SelectionMode::kStraightThrough);
  f.teacher_soft = tf.sample.soft.value();
  f.teacher_logits = tf.pred_logits.value();
  return f;
}

enum class Side { kGen, kPred };

// Builds the requested loss with one parameter replaced by the leaf under
// test; everything else enters as constants.
Var build_loss(Tape& tape, const Fixture& f, Side side, const std::string& param, Var leaf,
               const std::string& loss) {
  BoundNet bg = side == Side::kGen ? bind_with_substitute(tape, f.gen, param, leaf)
                                   : bind_frozen(tape, f.gen);
  BoundNet bp = side == Side::kPred ? bind_with_substitute(tape, f.pred, param, leaf)
                                    : bind_frozen(tape, f.pred);
  ReForward fwd = re_forward(tape, bg, bp, f.x, f.noise, f.tau, SelectionMode::kSoft);
  Var sel = selection_loss(fwd.mask, f.arch.features, f.weights.p_target);
  if (loss == "select") return sel;
  Var ce = task_ce(fwd.pred_logits, f.class_label);
  if (loss == "pred") return ce;
  Var re = re_loss(ce, sel, f.weights);
  if (loss == "re") return re;
  Var kdr = kd_rationale(f.teacher_soft, fwd.sample);
  if (loss == "kd_r") return kdr;
  Var kdy = kd_pred(f.teacher_logits, fwd.pred_logits, f.tau);
  if (loss == "kd_y") return kdy;
  Var kd = kd_combined(kdr, kdy, f.tau, f.weights);
  if (loss == "kd") return kd;
  return rekd_total(re, kd, f.weights);
}

const Matrix& param_value(const Net& net, const std::string& name) {
  for (const Parameter& p : net.params()) {
    if (p.name == name) return p.value;
  }
  throw std::invalid_argument("no parameter '" + name + "'");
}

void run_entry(GradCheckReport& report, double tol, const std::string& name,
               const ScalarFn& fn, const Matrix& at) {
  GradCheckEntry entry;
  entry.name = name;
  entry.max_rel_err = grad_check(fn, at);
  entry.passed = entry.max_rel_err < tol;
  report.worst = std::max(report.worst, entry.max_rel_err);
  report.all_passed = report.all_passed && entry.passed;
  report.entries.push_back(std::move(entry));
}

}  // namespace

GradCheckReport run_gradcheck_suite(double tol) {
  GradCheckReport report;

  for (Backbone kind : {Backbone::kPerFeatureMlp, Backbone::kTinyTransformer}) {
    const Fixture f = make_fixture(kind, 20240 + static_cast<std::uint64_t>(kind));

    std::vector<std::string> gen_params, pred_params;
    if (kind == Backbone::kPerFeatureMlp) {
      gen_params = {"mlp.0.weight", "head.weight"};
      pred_params = {"mlp.0.weight", "head.bias"};
    } else {
      gen_params = {"embed.weight", "block0.attn.wq", "block0.ffn.w1", "head.weight"};
      pred_params = {"block0.attn.wo", "final_norm.gamma", "summary", "head.weight"};
    }

    for (const std::string& pname : gen_params) {
      for (const char* loss : {"select", "kd_r", "re", "rekd"}) {
        const ScalarFn fn = [&f, &pname, loss](Tape& tape, Var leaf) {
          return build_loss(tape, f, Side::kGen, pname, leaf, loss);
        };
        run_entry(report, tol, f.label + "/gen." + pname + "/" + loss, fn,
                  param_value(f.gen, pname));
      }
    }
    for (const std::string& pname : pred_params) {
      for (const char* loss : {"pred", "kd_y", "re", "rekd"}) {
        const ScalarFn fn = [&f, &pname, loss](Tape& tape, Var leaf) {
          return build_loss(tape, f, Side::kPred, pname, leaf, loss);
        };
        run_entry(report, tol, f.label + "/pred." + pname + "/" + loss, fn,
                  param_value(f.pred, pname));
      }
    }

    // Logit-level composites: selection machinery without any network.
    Rng zrng(777 + static_cast<std::uint64_t>(kind));
    const Matrix z0 = gaussian_matrix(zrng, f.arch.features, 2);
    run_entry(report, tol, f.label + "/logits/select",
              [&f](Tape&, Var z) {
                GumbelSample s = gumbel_softmax(z, f.noise, f.tau);
                return selection_loss(soft_mask(s), f.arch.features, f.weights.p_target);
              },
              z0);
    run_entry(report, tol, f.label + "/logits/kd_r",
              [&f](Tape&, Var z) {
                GumbelSample s = gumbel_softmax(z, f.noise, f.tau);
                return kd_rationale(f.teacher_soft, s);
              },
              z0);
    Rng qrng(778 + static_cast<std::uint64_t>(kind));
    const Matrix q0 = gaussian_matrix(qrng, 1, f.arch.classes);
    run_entry(report, tol, f.label + "/logits/pred",
              [&f](Tape&, Var q) { return task_ce(q, f.class_label); }, q0);
    run_entry(report, tol, f.label + "/logits/kd_y",
              [&f](Tape&, Var q) { return kd_pred(f.teacher_logits, q, f.tau); }, q0);
  }

  return report;
}

std::vector<IdentityEntry> run_identity_checks(const std::vector<double>& taus, int pairs,
                                               std::uint64_t seed) {
  constexpr Index kFeatures = 8;
  std::vector<IdentityEntry> out;
  Rng root(seed);
  for (double tau : taus) {
    IdentityEntry entry;
    entry.tau = tau;
    Rng rng = root.fork(static_cast<std::uint64_t>(out.size() + 1));
    for (int i = 0; i < pairs; ++i) {
      const Matrix z_teacher = 2.0 * gaussian_matrix(rng, kFeatures, 2);
      const Matrix z_student = 2.0 * gaussian_matrix(rng, kFeatures, 2);
      const Matrix noise = sample_noise(rng, kFeatures);
      const Matrix teacher_soft = softmax_rows(z_teacher + noise, tau);

      Tape tape;
      Var z = tape.leaf(z_student);
      GumbelSample sample = gumbel_softmax(z, noise, tau);
      Var loss = kd_rationale(teacher_soft, sample);
      tape.backward(loss);
      const Matrix grad = z.grad();
      const Matrix expected = (sample.soft.value() - teacher_soft) / tau;
      entry.max_abs_err =
          std::max(entry.max_abs_err, (grad - expected).cwiseAbs().maxCoeff());

      // The counterfactual scaling: multiplying the loss by tau^2 must leave
      // a gradient of norm tau * ||S_student - S_teacher||.
      Tape tape2;
      Var z2 = tape2.leaf(z_student);
      GumbelSample sample2 = gumbel_softmax(z2, noise, tau);
      Var scaled = scale(kd_rationale(teacher_soft, sample2), tau * tau);
      tape2.backward(scaled);
      const double target_norm = tau * (sample.soft.value() - teacher_soft).norm();
      if (target_norm > 1e-12) {
        const double ratio_err = std::abs(z2.grad().norm() - target_norm) / target_norm;
        entry.max_ratio_err = std::max(entry.max_ratio_err, ratio_err);
      }
      ++entry.pairs;
    }
    out.push_back(entry);
  }
  return out;
}

}  // namespace rekd
