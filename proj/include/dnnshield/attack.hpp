#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "dnnshield/model.hpp"
#include "dnnshield/tensor.hpp"

namespace dnnshield {

enum class AttackKind { Fgsm, CwL2, Adaptive };

std::string_view to_string(AttackKind kind);

struct TargetMode {
  enum class Kind { Next, LeastLikely, Fixed };
  Kind kind = Kind::Next;
  std::size_t fixed_class = 0;

  static TargetMode next() { return {Kind::Next, 0}; }
  static TargetMode least_likely() { return {Kind::LeastLikely, 0}; }
  static TargetMode fixed(std::size_t t) { return {Kind::Fixed, t}; }
};

struct AttackConfig {
  AttackKind kind = AttackKind::CwL2;
  double k = 0.0;        // logit margin demanded on success
  double c = 1.0;        // weight of the margin loss
  double beta = 0.0;     // weight of the probability-mimicry term (adaptive attack)
  double epsilon = 0.1;  // FGSM step
  std::size_t iters = 500;
  double lr = 0.05;
  TargetMode target = TargetMode::next();
  bool targeted = true;  // untargeted CW flips the margin sign
  std::uint64_t seed = 1;
};

struct Distortion {
  double l0 = 0.0;  // fraction of elements changed by more than 1e-6
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
};

Distortion distortion(const Tensor& original, const Tensor& adversarial);

struct AttackResult {
  Tensor adversarial;
  bool success = false;
  std::size_t target = 0;          // target class (or the true label for untargeted)
  std::size_t predicted_class = 0;  // argmax on the adversarial
  Distortion distortion;
  double confidence = 0.0;  // z_gap of the adversarial logits
  double margin = 0.0;      // Z_t - max_{i != t} Z_i (targeted) on the adversarial
  std::optional<double> l1_to_target_probs;
};

/// Next: (argmax + 1) mod classes; LeastLikely: argmin; Fixed: the given class.
std::size_t select_target(std::span<const float> logits, TargetMode mode);

/// x' = clip(x + epsilon * sign(d CE / dx), 0, 1); success when the prediction leaves
/// the true label.
AttackResult fgsm(const Model& model, const Tensor& x, std::size_t true_label, double epsilon);

/// Gradient descent on c * cw(x') + ||x' - x||^2 over w with x' = (tanh(w) + 1) / 2.
/// Keeps the lowest-distortion iterate that reaches margin k. For an untargeted config,
/// `target` is the true label.
AttackResult cw_l2(const Model& model, const Tensor& x, std::size_t target,
                   const AttackConfig& config);

/// Defense-aware attack: minimises c * cw(x', t) + beta * ||y(x') - y(x_t)||_1 +
/// ||x' - x||^2 where t is the exemplar's predicted class. Rejects exemplars whose class
/// equals the current prediction of x (InvalidArgument).
AttackResult adaptive_attack(const Model& model, const Tensor& x, const Tensor& target_exemplar,
                             const AttackConfig& config);

}  // namespace dnnshield
