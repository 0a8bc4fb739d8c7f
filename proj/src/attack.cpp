#include "dnnshield/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dnnshield/detector.hpp"
#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"

namespace dnnshield {

namespace {

// Z_t - max_{i != t} Z_i
double target_margin(std::span<const float> logits, std::size_t target) {
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (i != target) other = std::max(other, static_cast<double>(logits[i]));
  return static_cast<double>(logits[target]) - other;
}

bool reached(std::span<const float> logits, std::size_t target, double k, bool targeted) {
  const double margin = target_margin(logits, target);
  return targeted ? (argmax(logits) == target && margin >= k)
                  : (argmax(logits) != target && -margin >= k);
}

void fill_outcome(const Model& model, const Tensor& x, AttackResult& r, std::size_t target,
                  bool success) {
  const Inference inf = forward(model, r.adversarial);
  r.success = success;
  r.target = target;
  r.predicted_class = argmax(inf.logits);
  r.distortion = distortion(x, r.adversarial);
  r.confidence = z_score_confidence(inf.logits).z_gap;
  r.margin = target_margin(inf.logits, target);
}

// Box-constrained descent shared by CW and the defense-aware attack. With beta == 0 the
// mimicry term vanishes and the objective is exactly the CW one.
AttackResult descend(const Model& model, const Tensor& x, std::size_t target,
                     std::vector<float> target_probs, const AttackConfig& config) {
  require(config.iters >= 1, ErrorKind::InvalidArgument, "iters must be >= 1");
  require(config.c > 0.0 && config.lr > 0.0 && config.k >= 0.0 && config.beta >= 0.0,
          ErrorKind::InvalidArgument, "attack parameters out of range");
  for (float v : x.data) {
    require(v >= 0.0f && v <= 1.0f, ErrorKind::DomainError, "attack input must lie in [0,1]");
  }

  const Inference clean = forward(model, x);
  require(target < clean.logits.size(), ErrorKind::InvalidArgument, "target class out of range");
  const bool mimic = !target_probs.empty();
  if (!mimic) target_probs.assign(clean.probs.size(), 0.0f);
  const MimicryLoss base{CwLoss{target, static_cast<float>(config.k), config.targeted},
                         static_cast<float>(config.c), mimic ? static_cast<float>(config.beta) : 0.0f,
                         target_probs, x};

  AttackResult result;
  if (reached(clean.logits, target, config.k, config.targeted) && !mimic) {
    result.adversarial = x;
    fill_outcome(model, x, result, target, true);
    return result;
  }

  constexpr float kEdge = 1.0f - 1e-6f;
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    w[i] = std::atanh(std::clamp(2.0f * x.data[i] - 1.0f, -kEdge, kEdge));
  }
  Tensor current(x.shape);
  double best_objective = std::numeric_limits<double>::infinity();
  std::optional<Tensor> best;
  for (std::size_t it = 0; it < config.iters; ++it) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      current.data[i] = static_cast<float>((std::tanh(w[i]) + 1.0) / 2.0);
    }
    const LossEvaluation eval = evaluate_loss(model, current, base);
    if (reached(eval.inference.logits, target, config.k, config.targeted) &&
        eval.value < best_objective) {
      best_objective = eval.value;
      best = current;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double t = std::tanh(w[i]);
      w[i] -= config.lr * eval.gradient.data[i] * (1.0 - t * t) / 2.0;
    }
  }
  if (best) {
    result.adversarial = std::move(*best);
    fill_outcome(model, x, result, target, true);
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) {
      current.data[i] = static_cast<float>((std::tanh(w[i]) + 1.0) / 2.0);
    }
    result.adversarial = current;
    fill_outcome(model, x, result, target,
                 reached(forward(model, current).logits, target, config.k, config.targeted));
  }
  if (mimic) {
    double l1 = 0.0;
    const auto probs = forward(model, result.adversarial).probs;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      l1 += std::abs(static_cast<double>(probs[i]) - target_probs[i]);
    }
    result.l1_to_target_probs = l1;
  }
  return result;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm: return "FGSM";
    case AttackKind::CwL2: return "CW_L2";
    case AttackKind::Adaptive: return "Adaptive";
  }
  return "Unknown";
}

Distortion distortion(const Tensor& original, const Tensor& adversarial) {
  require(original.shape == adversarial.shape, ErrorKind::ShapeMismatch,
          "distortion between tensors of different shape");
  Distortion d;
  double sq = 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double diff = std::abs(static_cast<double>(adversarial.data[i]) - original.data[i]);
    if (diff > 1e-6) ++changed;
    d.l1 += diff;
    sq += diff * diff;
    d.linf = std::max(d.linf, diff);
  }
  d.l2 = std::sqrt(sq);
  d.l0 = original.size() ? static_cast<double>(changed) / static_cast<double>(original.size()) : 0.0;
  return d;
}

std::size_t select_target(std::span<const float> logits, TargetMode mode) {
  require(logits.size() >= 2, ErrorKind::TooFewClasses, "need at least two classes");
  switch (mode.kind) {
    case TargetMode::Kind::Next:
      return (argmax(logits) + 1) % logits.size();
    case TargetMode::Kind::LeastLikely:
      return static_cast<std::size_t>(std::min_element(logits.begin(), logits.end()) -
                                      logits.begin());
    case TargetMode::Kind::Fixed:
      require(mode.fixed_class < logits.size(), ErrorKind::InvalidArgument,
              "fixed target out of range");
      return mode.fixed_class;
  }
  return 0;
}

AttackResult fgsm(const Model& model, const Tensor& x, std::size_t true_label, double epsilon) {
  require(epsilon >= 0.0, ErrorKind::InvalidArgument, "epsilon must be >= 0");
  const Tensor grad = gradient_wrt_input(model, x, CrossEntropyLoss{true_label});
  AttackResult result;
  result.adversarial = x;
  const auto eps = static_cast<float>(epsilon);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float g = grad.data[i];
    const float step = g > 0.0f ? eps : (g < 0.0f ? -eps : 0.0f);
    result.adversarial.data[i] = std::clamp(x.data[i] + step, 0.0f, 1.0f);
  }
  const auto logits = forward(model, result.adversarial).logits;
  fill_outcome(model, x, result, true_label, argmax(logits) != true_label);
  return result;
}

AttackResult cw_l2(const Model& model, const Tensor& x, std::size_t target,
                   const AttackConfig& config) {
  return descend(model, x, target, {}, config);
}

AttackResult adaptive_attack(const Model& model, const Tensor& x, const Tensor& target_exemplar,
                             const AttackConfig& config) {
  const Inference exemplar = forward(model, target_exemplar);
  const std::size_t target = argmax(exemplar.logits);
  require(target != argmax(forward(model, x).logits), ErrorKind::InvalidArgument,
          "target exemplar must belong to a class other than the input's prediction");
  return descend(model, x, target, exemplar.probs, config);
}

}  // namespace dnnshield
