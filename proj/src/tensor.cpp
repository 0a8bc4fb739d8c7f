#include "dnnshield/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "dnnshield/error.hpp"

namespace dnnshield {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::PlanMismatch: return "PlanMismatch";
    case ErrorKind::UnsupportedLayer: return "UnsupportedLayer";
    case ErrorKind::DivergenceError: return "DivergenceError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::EmptyFilter: return "EmptyFilter";
    case ErrorKind::TooFewClasses: return "TooFewClasses";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape s, float fill) : shape(std::move(s)), data(element_count(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
  require(element_count(shape) == data.size(), ErrorKind::ShapeMismatch,
          "shape " + shape_string(shape) + " does not match " + std::to_string(data.size()) +
              " values");
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace dnnshield
