#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "dnnshield/model.hpp"
#include "dnnshield/plan.hpp"
#include "dnnshield/tensor.hpp"

namespace dnnshield {

struct Inference {
  std::vector<float> logits;
  std::vector<float> probs;
};

/// Dense inference. Throws ShapeMismatch on a wrong input shape and NumericalError
/// if any layer produces a non-finite value.
Inference forward(const Model& model, const Tensor& input);

/// Inference with masked-out weights treated as zero. Bit-identical to forward() on a
/// copy of the model whose masked weights were overwritten with 0.0f.
Inference forward_masked(const Model& model, const Tensor& input, const SparsityPlan& plan);

std::vector<float> softmax(std::span<const float> logits);

/// Cross-entropy on the softmax output against a class label.
struct CrossEntropyLoss {
  std::size_t label = 0;
};

/// Carlini-Wagner margin loss on logits. Targeted form:
///   max(max_{i != t} Z_i - Z_t, -k)
/// Untargeted form (class = true label y):
///   max(Z_y - max_{i != y} Z_i, -k)
struct CwLoss {
  std::size_t target = 0;
  float k = 0.0f;
  bool targeted = true;
};

/// Defense-aware objective: c * cw + beta * ||y(x) - target_probs||_1 + ||x - origin||_2^2.
struct MimicryLoss {
  CwLoss cw;
  float c = 1.0f;
  float beta = 0.0f;
  std::vector<float> target_probs;
  Tensor origin;
};

using LossSpec = std::variant<CrossEntropyLoss, CwLoss, MimicryLoss>;

struct LossEvaluation {
  double value = 0.0;
  Tensor gradient;  // d loss / d input, same shape as the input
  Inference inference;
};

LossEvaluation evaluate_loss(const Model& model, const Tensor& input, const LossSpec& loss);

/// d loss / d input by reverse-mode differentiation.
Tensor gradient_wrt_input(const Model& model, const Tensor& input, const LossSpec& loss);

/// Scalar value of a loss at an input (no gradient).
double loss_value(const Model& model, const Tensor& input, const LossSpec& loss);

/// Parameter gradients in model layout: one entry per filter of every filter-bearing layer.
struct ParameterGradients {
  std::vector<std::vector<std::vector<float>>> weights;  // [layer][filter][weight]
  std::vector<std::vector<float>> biases;                // [layer][filter]

  explicit ParameterGradients(const Model& model);
  void clear();
};

/// Cross-entropy value for one sample; adds the parameter gradients into `grads`.
double accumulate_cross_entropy_gradients(const Model& model, const Tensor& input,
                                          std::size_t label, ParameterGradients& grads);

std::size_t argmax(std::span<const float> values);

}  // namespace dnnshield
