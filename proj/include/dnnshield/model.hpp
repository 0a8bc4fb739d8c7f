#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "dnnshield/tensor.hpp"

namespace dnnshield {

enum class LayerKind { Conv2D, FullyConnected, ReLU, MaxPool, AvgPool, Flatten, Softmax };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// One output channel (conv) or output unit (fc). Weights are (C,Kh,Kw); an fc
/// filter over n inputs is stored as (n,1,1).
struct Filter {
  int id = 0;
  Tensor weights;
  float bias = 0.0f;

  std::size_t weight_count() const noexcept { return weights.size(); }

  friend bool operator==(const Filter&, const Filter&) = default;
};

struct Layer {
  LayerKind kind = LayerKind::ReLU;
  std::vector<Filter> filters;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t pool = 2;

  bool has_filters() const noexcept {
    return kind == LayerKind::Conv2D || kind == LayerKind::FullyConnected;
  }

  static Layer of(LayerKind kind) {
    Layer layer;
    layer.kind = kind;
    return layer;
  }

  /// Zero-initialised layers; weights are filled later by training or loading.
  static Layer conv2d(std::size_t filters, std::size_t channels, std::size_t kernel,
                      std::size_t stride = 1, std::size_t padding = 0);
  static Layer fully_connected(std::size_t outputs, std::size_t inputs);
  static Layer relu() { return of(LayerKind::ReLU); }
  static Layer max_pool(std::size_t window, std::size_t stride);
  static Layer avg_pool(std::size_t window, std::size_t stride);
  static Layer flatten() { return of(LayerKind::Flatten); }
  static Layer softmax() { return of(LayerKind::Softmax); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Identifies one filter inside a model: the layer index plus the filter's position in it.
struct FilterKey {
  std::size_t layer = 0;
  std::size_t index = 0;
  int id = 0;
  std::size_t weight_count = 0;

  friend bool operator==(const FilterKey&, const FilterKey&) = default;
};

struct Model {
  std::vector<Layer> layers;
  Shape input_shape;
  std::size_t num_classes = 0;
  /// Training metadata; not part of the functional definition.
  std::optional<double> train_accuracy;

  /// Checks layer invariants and that consecutive shapes compose; throws ShapeMismatch
  /// or InvalidArgument.
  void validate() const;

  /// Output shape of every layer, in order (shape after layer i at index i).
  std::vector<Shape> layer_output_shapes() const;

  /// All filters of Conv2D/FullyConnected layers in model order.
  std::vector<FilterKey> filter_keys() const;

  /// Total number of conv/fc weights.
  std::size_t parameter_count() const;

  friend bool operator==(const Model&, const Model&) = default;
};

struct LabeledDataset {
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  void validate(std::size_t num_classes) const;
};

}  // namespace dnnshield
