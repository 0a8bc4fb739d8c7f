#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dnnshield {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float32 tensor. Activations use (C,H,W); a batch axis is never stored.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f);
  Tensor(Shape s, std::vector<float> values);

  std::size_t size() const noexcept { return data.size(); }
  std::span<float> values() noexcept { return data; }
  std::span<const float> values() const noexcept { return data; }

  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace dnnshield
