#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dnnshield/model.hpp"

namespace dnnshield {

/// Active-weight mask of one filter for one noisy pass.
struct FilterMask {
  std::size_t layer = 0;
  int filter_id = 0;
  std::vector<std::uint8_t> active;  // 1 = weight participates
  std::size_t active_count = 0;
  float threshold = 0.0f;

  friend bool operator==(const FilterMask&, const FilterMask&) = default;
};

/// Masks for every filter of a model, stored in model filter order.
struct SparsityPlan {
  std::vector<FilterMask> filters;

  static SparsityPlan all_active(const Model& model);

  /// Throws PlanMismatch unless the plan covers exactly the model's filters.
  void check_against(const Model& model) const;

  std::size_t active_weights() const;
  std::size_t total_weights() const;

  friend bool operator==(const SparsityPlan&, const SparsityPlan&) = default;
};

}  // namespace dnnshield
