#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dnnshield/model.hpp"
#include "dnnshield/plan.hpp"
#include "dnnshield/rng.hpp"

namespace dnnshield {

/// Offline profile of one filter: weight indices sorted by (|w|, index) ascending and
/// the magnitude threshold of every sparsification level.
struct FilterProfile {
  FilterKey key;
  std::vector<float> thresholds;     // size = levels, non-decreasing
  std::vector<std::uint32_t> order;  // ascending-magnitude permutation of weight indices

  friend bool operator==(const FilterProfile&, const FilterProfile&) = default;
};

struct ThresholdTable {
  std::size_t levels = 0;
  std::vector<FilterProfile> filters;  // model filter order

  /// Weights dropped at a level: ceil(level / (levels-1) * n), computed exactly.
  std::size_t drop_count(std::size_t level, std::size_t weight_count) const;
  /// Nearest level for a drop fraction in [0,1].
  std::size_t level_for(double drop_fraction) const;

  /// Throws PlanMismatch unless the table was profiled from a model with these filters.
  void check_against(const Model& model) const;

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;
};

/// Builds the per-filter threshold table; throws EmptyFilter on a weightless filter.
ThresholdTable profile_thresholds(const Model& model, std::size_t levels);

/// Binary table: "THRT", u32 levels, u32 filter count, then per filter u32 layer,
/// i32 filter id, u32 weight count and `levels` float32 thresholds (little-endian).
/// The sort permutation is recomputed from the model on load.
void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path);
ThresholdTable load_threshold_table(const std::filesystem::path& path, const Model& model);

enum class CapPolicy { Adaptive, Fixed };

struct SparsifierParams {
  double lambda = 0.8;  // upper bound of the adaptive cap
  double gamma = 0.3;   // confidence sensitivity
  std::size_t levels = 101;
  CapPolicy policy = CapPolicy::Adaptive;
  double fixed_cap = 0.0;  // used when policy == Fixed

  void validate() const;
};

/// SR_max = lambda * (1 - exp(-gamma * z_gap)).
double sr_cap_from_confidence(double z_gap, const SparsifierParams& params);

/// The cap used for a pass: the adaptive formula or the fixed cap.
double sr_cap_for(double z_gap, const SparsifierParams& params);

struct RateVector {
  std::vector<double> drop;  // one per filter, model order
  double cap = 0.0;
};

/// Per-filter drop fractions drawn i.i.d. from Uniform[0, sr_max].
RateVector sample_rates(double sr_max, std::size_t filter_count, CounterRng& rng);

/// Drops, per filter, the ceil(level_fraction * N) smallest-magnitude weights where the
/// level is the nearest table level to the filter's drop fraction.
SparsityPlan build_plan(const Model& model, const RateVector& rates, const ThresholdTable& table);

}  // namespace dnnshield
