#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnnshield/model.hpp"
#include "dnnshield/plan.hpp"

namespace dnnshield::accel {

enum class SimMode { Dense, Sparse };

struct AccelConfig {
  std::size_t tiles = 1;             // N: tiles working on different output positions
  std::size_t filters_per_tile = 4;  // k
  std::size_t lanes_per_filter = 1;  // m
  std::size_t lookahead = 2;         // W: input rows (of m positions) visible to the MUXes
  SimMode mode = SimMode::Sparse;

  void validate() const;
};

/// One filter's work: a mask over its M weight positions in input broadcast order.
struct FilterJob {
  int filter_id = 0;
  std::vector<std::uint8_t> mask;
  std::size_t active_count = 0;

  static FilterJob from_mask(int id, std::vector<std::uint8_t> mask);
  std::size_t positions() const noexcept { return mask.size(); }
};

struct ScheduleGroup {
  std::vector<FilterJob> jobs;
};

/// Timing of one group for a single output position.
struct GroupTiming {
  std::uint64_t cycles = 0;
  std::uint64_t mac_ops = 0;
  std::uint64_t stall_slots = 0;          // idle lane-cycles of the group's filters
  std::vector<std::uint32_t> cycle_macs;  // multiplications issued in each cycle
};

struct SimReport {
  AccelConfig config;
  std::uint64_t total_cycles = 0;
  std::uint64_t mac_ops = 0;
  double utilization = 0.0;  // mac_ops / (total_cycles * k * m)
  std::uint64_t stall_cycles = 0;
  std::vector<std::uint64_t> group_cycles;

  void merge(const SimReport& other);
  void refresh_utilization();
};

/// Sorts jobs by descending active count (ties by ascending id) and chunks them into
/// consecutive groups of at most k.
std::vector<ScheduleGroup> schedule_groups(std::vector<FilterJob> jobs, std::size_t k);

/// Groups in arrival order, no sorting (the ungrouped baseline).
std::vector<ScheduleGroup> schedule_in_order(std::vector<FilterJob> jobs, std::size_t k);

/// Dense tile: every weight position is broadcast, ceil(M/m) cycles per group.
GroupTiming time_group_dense(const ScheduleGroup& group, const AccelConfig& config);

/// Sparse tile. Each cycle every filter consumes up to m of its next active weights whose
/// positions lie in [base, base + W*m); afterwards base jumps to the smallest unconsumed
/// active position of the group. Runs until all active weights are consumed.
GroupTiming time_group_sparse(const ScheduleGroup& group, const AccelConfig& config);

/// Simulates groups for `output_positions` positions spread over the tiles.
SimReport simulate_dense(std::span<const ScheduleGroup> groups, const AccelConfig& config,
                         std::size_t output_positions = 1);
SimReport simulate_sparse(std::span<const ScheduleGroup> groups, const AccelConfig& config,
                          std::size_t output_positions = 1);

/// Jobs of one conv/fc layer and the number of output positions that reuse them.
struct LayerWorkload {
  std::size_t layer = 0;
  std::size_t output_positions = 1;
  std::vector<FilterJob> jobs;
};

/// Per-layer workloads of a model under a sparsity plan.
std::vector<LayerWorkload> workloads_from_plan(const Model& model, const SparsityPlan& plan);

/// Whole-model cycles: dense mode ignores masks; sparse mode schedules and skips.
SimReport simulate_model(std::span<const LayerWorkload> layers, const AccelConfig& config);

/// Per-input workload of one detection episode: the masks of each noisy run.
struct EpisodeWorkload {
  std::vector<std::vector<LayerWorkload>> runs;
};

/// Average over inputs of (dense cycles + sum of sparse cycles over the runs) / dense
/// cycles. The dense reference ignores masks. Throws EmptyCorpus on no inputs.
double detection_overhead(std::span<const EpisodeWorkload> episodes, const AccelConfig& config);

/// Mask hex encoding: byte j carries positions 8j..8j+7, bit (i mod 8) for position i;
/// bytes are written as two lowercase hex digits in ascending order.
std::string mask_to_hex(std::span<const std::uint8_t> mask);
std::vector<std::uint8_t> mask_from_hex(const std::string& hex, std::size_t positions);

}  // namespace dnnshield::accel
