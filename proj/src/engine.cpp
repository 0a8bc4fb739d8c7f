#include "dnnshield/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dnnshield/error.hpp"

namespace dnnshield {

namespace {

// Per-layer record of a forward pass, consumed by the backward sweep.
struct Tape {
  std::vector<Tensor> inputs;                       // input of layer i
  std::vector<std::vector<std::size_t>> max_index;  // MaxPool argmax (flat input index)
};

void check_finite(const Tensor& t, std::size_t layer, LayerKind kind) {
  if (!t.all_finite()) {
    fail(ErrorKind::NumericalError, "non-finite activation after layer " + std::to_string(layer) +
                                        " (" + std::string(to_string(kind)) + ")");
  }
}

// `masks` points at the plan entries of this layer (one per filter) or is null for dense.
Tensor conv_forward(const Layer& layer, const Tensor& in, const Shape& out_shape,
                    const FilterMask* masks) {
  Tensor out(out_shape);
  const std::size_t channels = in.shape[0], in_h = in.shape[1], in_w = in.shape[2];
  const std::size_t out_h = out_shape[1], out_w = out_shape[2];
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  for (std::size_t f = 0; f < layer.filters.size(); ++f) {
    const Filter& filter = layer.filters[f];
    const std::size_t kh = filter.weights.shape[1], kw = filter.weights.shape[2];
    const float* wt = filter.weights.data.data();
    const std::uint8_t* active = masks ? masks[f].active.data() : nullptr;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
              const std::size_t wi = (c * kh + ky) * kw + kx;
              const float w = (active == nullptr || active[wi]) ? wt[wi] : 0.0f;
              acc += w * in.data[(c * in_h + static_cast<std::size_t>(iy)) * in_w +
                                 static_cast<std::size_t>(ix)];
            }
          }
        }
        out.data[(f * out_h + oy) * out_w + ox] = acc + filter.bias;
      }
    }
  }
  return out;
}

Tensor fc_forward(const Layer& layer, const Tensor& in, const FilterMask* masks) {
  Tensor out({layer.filters.size()});
  for (std::size_t f = 0; f < layer.filters.size(); ++f) {
    const Filter& filter = layer.filters[f];
    const float* wt = filter.weights.data.data();
    const std::uint8_t* active = masks ? masks[f].active.data() : nullptr;
    float acc = 0.0f;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const float w = (active == nullptr || active[i]) ? wt[i] : 0.0f;
      acc += w * in.data[i];
    }
    out.data[f] = acc + filter.bias;
  }
  return out;
}

Tensor pool_forward(const Layer& layer, const Tensor& in, const Shape& out_shape,
                    std::vector<std::size_t>* max_index) {
  Tensor out(out_shape);
  const std::size_t channels = in.shape[0], in_h = in.shape[1], in_w = in.shape[2];
  const std::size_t out_h = out_shape[1], out_w = out_shape[2];
  if (max_index) max_index->assign(out.size(), 0);
  const bool is_max = layer.kind == LayerKind::MaxPool;
  const float window = static_cast<float>(layer.pool * layer.pool);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        std::size_t best_at = 0;
        float sum = 0.0f;
        for (std::size_t py = 0; py < layer.pool; ++py) {
          for (std::size_t px = 0; px < layer.pool; ++px) {
            const std::size_t at =
                (c * in_h + oy * layer.stride + py) * in_w + ox * layer.stride + px;
            const float v = in.data[at];
            sum += v;
            if (v > best) {
              best = v;
              best_at = at;
            }
          }
        }
        const std::size_t o = (c * out_h + oy) * out_w + ox;
        out.data[o] = is_max ? best : sum / window;
        if (max_index) (*max_index)[o] = best_at;
      }
    }
  }
  return out;
}

Inference run_forward(const Model& model, const Tensor& input, const SparsityPlan* plan,
                      Tape* tape) {
  require(input.shape == model.input_shape, ErrorKind::ShapeMismatch,
          "input shape " + shape_string(input.shape) + " != model input " +
              shape_string(model.input_shape));
  require(input.all_finite(), ErrorKind::NumericalError, "input contains non-finite values");
  if (plan) plan->check_against(model);
  const auto shapes = model.layer_output_shapes();
  if (tape) {
    tape->inputs.clear();
    tape->max_index.assign(model.layers.size(), {});
  }

  Tensor current = input;
  std::size_t plan_cursor = 0;
  Inference result;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (tape) tape->inputs.push_back(current);
    const FilterMask* masks = nullptr;
    if (plan && layer.has_filters()) {
      masks = plan->filters.data() + plan_cursor;
      plan_cursor += layer.filters.size();
    }
    switch (layer.kind) {
      case LayerKind::Conv2D:
        current = conv_forward(layer, current, shapes[i], masks);
        break;
      case LayerKind::FullyConnected:
        current = fc_forward(layer, current, masks);
        break;
      case LayerKind::ReLU:
        for (float& v : current.data) v = v > 0.0f ? v : 0.0f;
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        current = pool_forward(layer, current, shapes[i], tape ? &tape->max_index[i] : nullptr);
        break;
      case LayerKind::Flatten:
        current.shape = shapes[i];
        break;
      case LayerKind::Softmax:
        result.logits = current.data;
        result.probs = softmax(result.logits);
        current.data = result.probs;
        break;
    }
    check_finite(current, i, layer.kind);
  }
  require(!result.logits.empty(), ErrorKind::InvalidArgument, "model has no Softmax layer");
  return result;
}

// Backpropagates d loss / d logits to d loss / d input; optionally accumulates
// parameter gradients.
Tensor run_backward(const Model& model, const Tape& tape, std::span<const float> dlogits,
                    ParameterGradients* grads) {
  const std::size_t last = model.layers.size() - 1;
  Tensor grad(tape.inputs[last].shape, std::vector<float>(dlogits.begin(), dlogits.end()));
  for (std::size_t step = last; step-- > 0;) {
    const Layer& layer = model.layers[step];
    const Tensor& in = tape.inputs[step];
    Tensor dx(in.shape);
    switch (layer.kind) {
      case LayerKind::Conv2D: {
        const std::size_t channels = in.shape[0], in_h = in.shape[1], in_w = in.shape[2];
        const std::size_t out_h = grad.shape[1], out_w = grad.shape[2];
        const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
        for (std::size_t f = 0; f < layer.filters.size(); ++f) {
          const Filter& filter = layer.filters[f];
          const std::size_t kh = filter.weights.shape[1], kw = filter.weights.shape[2];
          float* dw = grads ? grads->weights[step][f].data() : nullptr;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const float g = grad.data[(f * out_h + oy) * out_w + ox];
              if (grads) grads->biases[step][f] += g;
              if (g == 0.0f) continue;
              for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  const std::ptrdiff_t iy =
                      static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
                    const std::size_t wi = (c * kh + ky) * kw + kx;
                    const std::size_t xi = (c * in_h + static_cast<std::size_t>(iy)) * in_w +
                                           static_cast<std::size_t>(ix);
                    dx.data[xi] += filter.weights.data[wi] * g;
                    if (dw) dw[wi] += in.data[xi] * g;
                  }
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::FullyConnected:
        for (std::size_t f = 0; f < layer.filters.size(); ++f) {
          const float g = grad.data[f];
          const float* wt = layer.filters[f].weights.data.data();
          if (grads) {
            grads->biases[step][f] += g;
            float* dw = grads->weights[step][f].data();
            for (std::size_t i = 0; i < in.size(); ++i) dw[i] += in.data[i] * g;
          }
          for (std::size_t i = 0; i < in.size(); ++i) dx.data[i] += wt[i] * g;
        }
        break;
      case LayerKind::ReLU:
        for (std::size_t i = 0; i < in.size(); ++i) dx.data[i] = in.data[i] > 0.0f ? grad.data[i] : 0.0f;
        break;
      case LayerKind::MaxPool: {
        const auto& index = tape.max_index[step];
        for (std::size_t o = 0; o < grad.size(); ++o) dx.data[index[o]] += grad.data[o];
        break;
      }
      case LayerKind::AvgPool: {
        const std::size_t in_h = in.shape[1], in_w = in.shape[2];
        const std::size_t out_h = grad.shape[1], out_w = grad.shape[2];
        const float scale = 1.0f / static_cast<float>(layer.pool * layer.pool);
        for (std::size_t c = 0; c < in.shape[0]; ++c)
          for (std::size_t oy = 0; oy < out_h; ++oy)
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const float g = grad.data[(c * out_h + oy) * out_w + ox] * scale;
              for (std::size_t py = 0; py < layer.pool; ++py)
                for (std::size_t px = 0; px < layer.pool; ++px)
                  dx.data[(c * in_h + oy * layer.stride + py) * in_w + ox * layer.stride + px] += g;
            }
        break;
      }
      case LayerKind::Flatten:
        dx.data = grad.data;
        break;
      case LayerKind::Softmax:
        fail(ErrorKind::UnsupportedLayer, "Softmax is only differentiable as the final layer");
    }
    grad = std::move(dx);
  }
  return grad;
}

// Vector-Jacobian product of softmax: returns d/dlogits given d/dprobs.
std::vector<float> softmax_backward(std::span<const float> probs, std::span<const float> dprobs) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += static_cast<double>(probs[i]) * dprobs[i];
  std::vector<float> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = static_cast<float>(probs[i] * (dprobs[i] - dot));
  }
  return out;
}

double log_softmax_at(std::span<const float> logits, std::size_t index) {
  const float peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float z : logits) sum += std::exp(static_cast<double>(z) - peak);
  return static_cast<double>(logits[index]) - peak - std::log(sum);
}

// Returns the CW value and writes its logit gradient.
double cw_value(const CwLoss& loss, std::span<const float> logits, std::span<float> dlogits) {
  const std::size_t n = logits.size();
  require(loss.target < n, ErrorKind::InvalidArgument, "CW class out of range");
  std::size_t other = loss.target == 0 ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != loss.target && logits[i] > logits[other]) other = i;
  }
  const double gap = static_cast<double>(logits[other]) - logits[loss.target];
  const double margin_term = loss.targeted ? gap : -gap;
  if (margin_term <= -static_cast<double>(loss.k)) return -static_cast<double>(loss.k);
  const float sign = loss.targeted ? 1.0f : -1.0f;
  dlogits[other] += sign;
  dlogits[loss.target] -= sign;
  return margin_term;
}

LossEvaluation evaluate_impl(const Model& model, const Tensor& input, const LossSpec& loss,
                             bool want_gradient) {
  Tape tape;
  LossEvaluation eval;
  eval.inference = run_forward(model, input, nullptr, want_gradient ? &tape : nullptr);
  const auto& logits = eval.inference.logits;
  const auto& probs = eval.inference.probs;
  std::vector<float> dlogits(logits.size(), 0.0f);
  const Tensor* origin = nullptr;
  float origin_scale = 0.0f;

  if (const auto* ce = std::get_if<CrossEntropyLoss>(&loss)) {
    require(ce->label < logits.size(), ErrorKind::InvalidArgument, "label out of range");
    eval.value = -log_softmax_at(logits, ce->label);
    for (std::size_t i = 0; i < logits.size(); ++i) dlogits[i] = probs[i];
    dlogits[ce->label] -= 1.0f;
  } else if (const auto* cw = std::get_if<CwLoss>(&loss)) {
    eval.value = cw_value(*cw, logits, dlogits);
  } else {
    const auto& mimic = std::get<MimicryLoss>(loss);
    require(mimic.target_probs.size() == probs.size(), ErrorKind::ShapeMismatch,
            "target probability vector has the wrong length");
    require(mimic.origin.shape == input.shape, ErrorKind::ShapeMismatch,
            "origin shape differs from input");
    std::vector<float> dcw(logits.size(), 0.0f);
    const double cw_term = cw_value(mimic.cw, logits, dcw);
    double l1 = 0.0;
    std::vector<float> dprobs(probs.size(), 0.0f);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double d = static_cast<double>(probs[i]) - mimic.target_probs[i];
      l1 += std::abs(d);
      dprobs[i] = d > 0.0 ? mimic.beta : (d < 0.0 ? -mimic.beta : 0.0f);
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
      const double d = static_cast<double>(input.data[i]) - mimic.origin.data[i];
      dist += d * d;
    }
    eval.value = mimic.c * cw_term + mimic.beta * l1 + dist;
    const auto dl1 = softmax_backward(probs, dprobs);
    for (std::size_t i = 0; i < logits.size(); ++i) dlogits[i] = mimic.c * dcw[i] + dl1[i];
    origin = &mimic.origin;
    origin_scale = 2.0f;
  }

  if (want_gradient) {
    eval.gradient = run_backward(model, tape, dlogits, nullptr);
    if (origin) {
      for (std::size_t i = 0; i < input.size(); ++i) {
        eval.gradient.data[i] += origin_scale * (input.data[i] - origin->data[i]);
      }
    }
    require(eval.gradient.all_finite(), ErrorKind::NumericalError, "non-finite gradient");
  }
  return eval;
}

}  // namespace

std::vector<float> softmax(std::span<const float> logits) {
  const float peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - peak);
    sum += e[i];
  }
  std::vector<float> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = static_cast<float>(e[i] / sum);
  return probs;
}

std::size_t argmax(std::span<const float> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Inference forward(const Model& model, const Tensor& input) {
  return run_forward(model, input, nullptr, nullptr);
}

Inference forward_masked(const Model& model, const Tensor& input, const SparsityPlan& plan) {
  return run_forward(model, input, &plan, nullptr);
}

LossEvaluation evaluate_loss(const Model& model, const Tensor& input, const LossSpec& loss) {
  return evaluate_impl(model, input, loss, true);
}

Tensor gradient_wrt_input(const Model& model, const Tensor& input, const LossSpec& loss) {
  return evaluate_impl(model, input, loss, true).gradient;
}

double loss_value(const Model& model, const Tensor& input, const LossSpec& loss) {
  return evaluate_impl(model, input, loss, false).value;
}

ParameterGradients::ParameterGradients(const Model& model)
    : weights(model.layers.size()), biases(model.layers.size()) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (const Filter& f : model.layers[l].filters) {
      weights[l].emplace_back(f.weight_count(), 0.0f);
      biases[l].push_back(0.0f);
    }
  }
}

void ParameterGradients::clear() {
  for (auto& layer : weights)
    for (auto& w : layer) std::fill(w.begin(), w.end(), 0.0f);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0f);
}

double accumulate_cross_entropy_gradients(const Model& model, const Tensor& input,
                                          std::size_t label, ParameterGradients& grads) {
  Tape tape;
  const Inference inf = run_forward(model, input, nullptr, &tape);
  require(label < inf.logits.size(), ErrorKind::InvalidArgument, "label out of range");
  std::vector<float> dlogits = inf.probs;
  dlogits[label] -= 1.0f;
  run_backward(model, tape, dlogits, &grads);
  return -log_softmax_at(inf.logits, label);
}

}  // namespace dnnshield
