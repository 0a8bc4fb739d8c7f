#include "dnnshield/model.hpp"

#include <set>
#include <string>

#include "dnnshield/error.hpp"
#include "dnnshield/plan.hpp"

namespace dnnshield {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::FullyConnected: return "FullyConnected";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::AvgPool: return "AvgPool";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Softmax: return "Softmax";
  }
  return "Unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto kind : {LayerKind::Conv2D, LayerKind::FullyConnected, LayerKind::ReLU,
                    LayerKind::MaxPool, LayerKind::AvgPool, LayerKind::Flatten,
                    LayerKind::Softmax}) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorKind::UnsupportedLayer, "unknown layer kind '" + std::string(name) + "'");
}

Layer Layer::conv2d(std::size_t filters, std::size_t channels, std::size_t kernel,
                    std::size_t stride, std::size_t padding) {
  Layer layer = of(LayerKind::Conv2D);
  layer.stride = stride;
  layer.padding = padding;
  for (std::size_t f = 0; f < filters; ++f) {
    layer.filters.push_back(Filter{static_cast<int>(f), Tensor({channels, kernel, kernel}), 0.0f});
  }
  return layer;
}

Layer Layer::fully_connected(std::size_t outputs, std::size_t inputs) {
  Layer layer = of(LayerKind::FullyConnected);
  for (std::size_t f = 0; f < outputs; ++f) {
    layer.filters.push_back(Filter{static_cast<int>(f), Tensor({inputs, 1, 1}), 0.0f});
  }
  return layer;
}

Layer Layer::max_pool(std::size_t window, std::size_t stride) {
  Layer layer = of(LayerKind::MaxPool);
  layer.pool = window;
  layer.stride = stride;
  return layer;
}

Layer Layer::avg_pool(std::size_t window, std::size_t stride) {
  Layer layer = of(LayerKind::AvgPool);
  layer.pool = window;
  layer.stride = stride;
  return layer;
}

namespace {

Shape next_shape(const Layer& layer, const Shape& in, std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + " (" +
                            std::string(to_string(layer.kind)) + ")";
  switch (layer.kind) {
    case LayerKind::Conv2D: {
      require(in.size() == 3, ErrorKind::ShapeMismatch, where + " expects (C,H,W) input");
      const auto& w = layer.filters.front().weights.shape;
      require(w.size() == 3 && w[0] == in[0], ErrorKind::ShapeMismatch,
              where + " filter channels do not match input " + shape_string(in));
      const std::size_t h = in[1] + 2 * layer.padding;
      const std::size_t wd = in[2] + 2 * layer.padding;
      require(h >= w[1] && wd >= w[2], ErrorKind::ShapeMismatch, where + " kernel larger than input");
      return {layer.filters.size(), (h - w[1]) / layer.stride + 1, (wd - w[2]) / layer.stride + 1};
    }
    case LayerKind::FullyConnected:
      require(element_count(in) == layer.filters.front().weight_count(), ErrorKind::ShapeMismatch,
              where + " expects " + std::to_string(layer.filters.front().weight_count()) +
                  " inputs, got " + shape_string(in));
      return {layer.filters.size()};
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      require(in.size() == 3, ErrorKind::ShapeMismatch, where + " expects (C,H,W) input");
      require(layer.pool >= 1 && in[1] >= layer.pool && in[2] >= layer.pool,
              ErrorKind::ShapeMismatch, where + " window larger than input");
      return {in[0], (in[1] - layer.pool) / layer.stride + 1, (in[2] - layer.pool) / layer.stride + 1};
    case LayerKind::Flatten:
      return {element_count(in)};
    case LayerKind::ReLU:
    case LayerKind::Softmax:
      return in;
  }
  fail(ErrorKind::UnsupportedLayer, where);
}

}  // namespace

std::vector<Shape> Model::layer_output_shapes() const {
  std::vector<Shape> shapes;
  Shape current = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    current = next_shape(layers[i], current, i);
    shapes.push_back(current);
  }
  return shapes;
}

void Model::validate() const {
  require(!layers.empty(), ErrorKind::InvalidArgument, "model has no layers");
  require(element_count(input_shape) > 0, ErrorKind::InvalidArgument, "empty input shape");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    require(layer.stride >= 1, ErrorKind::InvalidArgument, "stride must be >= 1");
    require((layer.kind == LayerKind::Softmax) == (i + 1 == layers.size()),
            ErrorKind::InvalidArgument, "exactly one Softmax, as the final layer, is required");
    if (layer.has_filters()) {
      require(!layer.filters.empty(), ErrorKind::InvalidArgument,
              "layer " + std::to_string(i) + " has no filters");
      std::set<int> ids;
      const Shape& first = layer.filters.front().weights.shape;
      for (const Filter& f : layer.filters) {
        require(f.weight_count() >= 1, ErrorKind::EmptyFilter,
                "filter " + std::to_string(f.id) + " has no weights");
        require(f.weights.shape == first, ErrorKind::ShapeMismatch, "filters differ in shape");
        require(ids.insert(f.id).second, ErrorKind::InvalidArgument,
                "duplicate filter id " + std::to_string(f.id));
      }
    }
  }
  const auto shapes = layer_output_shapes();
  require(element_count(shapes.back()) == num_classes, ErrorKind::ShapeMismatch,
          "final layer produces " + shape_string(shapes.back()) + " but num_classes is " +
              std::to_string(num_classes));
}

std::vector<FilterKey> Model::filter_keys() const {
  std::vector<FilterKey> keys;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].has_filters()) continue;
    for (std::size_t f = 0; f < layers[l].filters.size(); ++f) {
      const Filter& filter = layers[l].filters[f];
      keys.push_back(FilterKey{l, f, filter.id, filter.weight_count()});
    }
  }
  return keys;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& key : filter_keys()) n += key.weight_count;
  return n;
}

void LabeledDataset::validate(std::size_t num_classes) const {
  require(inputs.size() == labels.size(), ErrorKind::ShapeMismatch,
          "dataset has " + std::to_string(inputs.size()) + " inputs but " +
              std::to_string(labels.size()) + " labels");
  for (std::size_t label : labels) {
    require(label < num_classes, ErrorKind::InvalidArgument,
            "label " + std::to_string(label) + " out of range");
  }
}

SparsityPlan SparsityPlan::all_active(const Model& model) {
  SparsityPlan plan;
  for (const auto& key : model.filter_keys()) {
    plan.filters.push_back(FilterMask{key.layer, key.id,
                                      std::vector<std::uint8_t>(key.weight_count, 1),
                                      key.weight_count, 0.0f});
  }
  return plan;
}

void SparsityPlan::check_against(const Model& model) const {
  const auto keys = model.filter_keys();
  require(keys.size() == filters.size(), ErrorKind::PlanMismatch,
          "plan covers " + std::to_string(filters.size()) + " filters, model has " +
              std::to_string(keys.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const FilterMask& m = filters[i];
    require(m.layer == keys[i].layer && m.filter_id == keys[i].id, ErrorKind::PlanMismatch,
            "plan entry " + std::to_string(i) + " does not match model filter order");
    require(m.active.size() == keys[i].weight_count, ErrorKind::PlanMismatch,
            "mask length differs from filter weight count at entry " + std::to_string(i));
  }
}

std::size_t SparsityPlan::active_weights() const {
  std::size_t n = 0;
  for (const auto& m : filters) n += m.active_count;
  return n;
}

std::size_t SparsityPlan::total_weights() const {
  std::size_t n = 0;
  for (const auto& m : filters) n += m.active.size();
  return n;
}

}  // namespace dnnshield
