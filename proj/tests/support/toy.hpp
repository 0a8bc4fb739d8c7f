#pragma once

#include <vector>

#include "dnnshield/model.hpp"

namespace toy {

using namespace dnnshield;

/// Single fully connected layer plus softmax; rows of `w` are the output units.
inline Model linear(const std::vector<std::vector<float>>& w, const std::vector<float>& bias = {}) {
  Model m;
  m.input_shape = {w.front().size()};
  m.num_classes = w.size();
  Layer fc = Layer::fully_connected(w.size(), w.front().size());
  for (std::size_t f = 0; f < w.size(); ++f) {
    fc.filters[f].weights.data = w[f];
    if (!bias.empty()) fc.filters[f].bias = bias[f];
  }
  m.layers = {fc, Layer::softmax()};
  return m;
}

inline std::vector<std::vector<float>> identity(std::size_t n) {
  std::vector<std::vector<float>> w(n, std::vector<float>(n, 0.0f));
  for (std::size_t i = 0; i < n; ++i) w[i][i] = 1.0f;
  return w;
}

/// Conv layer whose outputs are exposed unchanged as logits through an identity FC.
inline Model conv_probe(Layer conv, const Shape& input) {
  Model m;
  m.input_shape = input;
  m.layers = {conv};
  const Shape out = m.layer_output_shapes().back();
  const std::size_t n = out[0] * out[1] * out[2];
  Layer fc = Layer::fully_connected(n, n);
  for (std::size_t i = 0; i < n; ++i) fc.filters[i].weights.data[i] = 1.0f;
  m.layers.push_back(Layer::flatten());
  m.layers.push_back(fc);
  m.layers.push_back(Layer::softmax());
  m.num_classes = n;
  return m;
}

}  // namespace toy
