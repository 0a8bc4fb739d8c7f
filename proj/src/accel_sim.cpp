#include "dnnshield/accel_sim.hpp"

#include <algorithm>
#include <numeric>

#include "dnnshield/error.hpp"

namespace dnnshield::accel {

void AccelConfig::validate() const {
  require(tiles >= 1 && filters_per_tile >= 1 && lanes_per_filter >= 1 && lookahead >= 1,
          ErrorKind::InvalidArgument, "accelerator parameters must all be >= 1");
}

FilterJob FilterJob::from_mask(int id, std::vector<std::uint8_t> mask) {
  FilterJob job{id, std::move(mask), 0};
  job.active_count = static_cast<std::size_t>(std::count_if(
      job.mask.begin(), job.mask.end(), [](std::uint8_t b) { return b != 0; }));
  return job;
}

void SimReport::merge(const SimReport& other) {
  total_cycles += other.total_cycles;
  mac_ops += other.mac_ops;
  stall_cycles += other.stall_cycles;
  group_cycles.insert(group_cycles.end(), other.group_cycles.begin(), other.group_cycles.end());
  refresh_utilization();
}

void SimReport::refresh_utilization() {
  const double slots = static_cast<double>(total_cycles) *
                       static_cast<double>(config.filters_per_tile * config.lanes_per_filter *
                                           config.tiles);
  utilization = slots > 0.0 ? static_cast<double>(mac_ops) / slots : 0.0;
}

namespace {

std::vector<ScheduleGroup> chunk(std::vector<FilterJob> jobs, std::size_t k) {
  require(!jobs.empty(), ErrorKind::InvalidArgument, "no filter jobs to schedule");
  require(k >= 1, ErrorKind::InvalidArgument, "group size must be >= 1");
  std::vector<ScheduleGroup> groups;
  for (std::size_t i = 0; i < jobs.size(); i += k) {
    ScheduleGroup g;
    for (std::size_t j = i; j < std::min(jobs.size(), i + k); ++j) g.jobs.push_back(std::move(jobs[j]));
    groups.push_back(std::move(g));
  }
  return groups;
}

std::size_t group_positions(const ScheduleGroup& group) {
  std::size_t m = 0;
  for (const auto& job : group.jobs) m = std::max(m, job.positions());
  return m;
}

SimReport simulate(std::span<const ScheduleGroup> groups, const AccelConfig& config,
                   std::size_t output_positions, bool sparse) {
  config.validate();
  require(output_positions >= 1, ErrorKind::InvalidArgument, "need at least one output position");
  SimReport report;
  report.config = config;
  const std::uint64_t rounds = (output_positions + config.tiles - 1) / config.tiles;
  for (const ScheduleGroup& group : groups) {
    require(group.jobs.size() <= config.filters_per_tile, ErrorKind::InvalidArgument,
            "group larger than filters_per_tile");
    const GroupTiming t = sparse ? time_group_sparse(group, config) : time_group_dense(group, config);
    report.group_cycles.push_back(t.cycles * rounds);
    report.total_cycles += t.cycles * rounds;
    report.mac_ops += t.mac_ops * output_positions;
    report.stall_cycles += t.stall_slots * output_positions;
  }
  report.refresh_utilization();
  return report;
}

}  // namespace

std::vector<ScheduleGroup> schedule_groups(std::vector<FilterJob> jobs, std::size_t k) {
  std::stable_sort(jobs.begin(), jobs.end(), [](const FilterJob& a, const FilterJob& b) {
    return a.active_count != b.active_count ? a.active_count > b.active_count
                                            : a.filter_id < b.filter_id;
  });
  return chunk(std::move(jobs), k);
}

std::vector<ScheduleGroup> schedule_in_order(std::vector<FilterJob> jobs, std::size_t k) {
  return chunk(std::move(jobs), k);
}

GroupTiming time_group_dense(const ScheduleGroup& group, const AccelConfig& config) {
  const std::size_t m = config.lanes_per_filter;
  const std::size_t positions = group_positions(group);
  GroupTiming t;
  t.cycles = (positions + m - 1) / m;
  for (std::uint64_t c = 0; c < t.cycles; ++c) {
    std::uint32_t macs = 0;
    for (const auto& job : group.jobs) {
      for (std::size_t p = c * m; p < std::min(job.positions(), (c + 1) * m); ++p) macs += job.mask[p] != 0;
    }
    t.cycle_macs.push_back(macs);
    t.mac_ops += macs;
  }
  t.stall_slots = t.cycles * m * group.jobs.size() - t.mac_ops;
  return t;
}

GroupTiming time_group_sparse(const ScheduleGroup& group, const AccelConfig& config) {
  const std::size_t m = config.lanes_per_filter;
  const std::size_t window = config.lookahead * m;
  std::vector<std::vector<std::size_t>> active(group.jobs.size());
  for (std::size_t f = 0; f < group.jobs.size(); ++f) {
    const auto& mask = group.jobs[f].mask;
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (mask[p]) active[f].push_back(p);
  }
  std::vector<std::size_t> next(group.jobs.size(), 0);
  GroupTiming t;
  for (;;) {
    std::size_t base = SIZE_MAX;
    for (std::size_t f = 0; f < active.size(); ++f)
      if (next[f] < active[f].size()) base = std::min(base, active[f][next[f]]);
    if (base == SIZE_MAX) break;
    std::uint32_t macs = 0;
    for (std::size_t f = 0; f < active.size(); ++f) {
      std::size_t taken = 0;
      while (taken < m && next[f] < active[f].size() && active[f][next[f]] < base + window) {
        ++next[f];
        ++taken;
      }
      macs += static_cast<std::uint32_t>(taken);
    }
    ++t.cycles;
    t.mac_ops += macs;
    t.cycle_macs.push_back(macs);
  }
  t.stall_slots = t.cycles * m * group.jobs.size() - t.mac_ops;
  return t;
}

SimReport simulate_dense(std::span<const ScheduleGroup> groups, const AccelConfig& config,
                         std::size_t output_positions) {
  require(config.mode == SimMode::Dense, ErrorKind::InvalidArgument, "config mode must be Dense");
  return simulate(groups, config, output_positions, false);
}

SimReport simulate_sparse(std::span<const ScheduleGroup> groups, const AccelConfig& config,
                          std::size_t output_positions) {
  require(config.mode == SimMode::Sparse, ErrorKind::InvalidArgument, "config mode must be Sparse");
  return simulate(groups, config, output_positions, true);
}

std::vector<LayerWorkload> workloads_from_plan(const Model& model, const SparsityPlan& plan) {
  plan.check_against(model);
  const auto shapes = model.layer_output_shapes();
  std::vector<LayerWorkload> out;
  std::size_t cursor = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    if (!layer.has_filters()) continue;
    LayerWorkload w;
    w.layer = l;
    w.output_positions = layer.kind == LayerKind::Conv2D ? shapes[l][1] * shapes[l][2] : 1;
    for (std::size_t f = 0; f < layer.filters.size(); ++f, ++cursor) {
      w.jobs.push_back(FilterJob{plan.filters[cursor].filter_id, plan.filters[cursor].active,
                                 plan.filters[cursor].active_count});
    }
    out.push_back(std::move(w));
  }
  return out;
}

SimReport simulate_model(std::span<const LayerWorkload> layers, const AccelConfig& config) {
  SimReport total;
  total.config = config;
  for (const LayerWorkload& layer : layers) {
    if (config.mode == SimMode::Dense) {
      const auto groups = schedule_in_order(layer.jobs, config.filters_per_tile);
      total.merge(simulate_dense(groups, config, layer.output_positions));
    } else {
      const auto groups = schedule_groups(layer.jobs, config.filters_per_tile);
      total.merge(simulate_sparse(groups, config, layer.output_positions));
    }
  }
  return total;
}

double detection_overhead(std::span<const EpisodeWorkload> episodes, const AccelConfig& config) {
  require(!episodes.empty(), ErrorKind::EmptyCorpus, "no detection episodes to simulate");
  AccelConfig dense = config;
  dense.mode = SimMode::Dense;
  AccelConfig sparse = config;
  sparse.mode = SimMode::Sparse;
  double sum = 0.0;
  for (const EpisodeWorkload& ep : episodes) {
    require(!ep.runs.empty(), ErrorKind::InvalidArgument, "episode without noisy runs");
    const double base = static_cast<double>(simulate_model(ep.runs.front(), dense).total_cycles);
    require(base > 0.0, ErrorKind::InvalidArgument, "empty dense workload");
    double extra = 0.0;
    for (const auto& run : ep.runs) extra += static_cast<double>(simulate_model(run, sparse).total_cycles);
    sum += (base + extra) / base;
  }
  return sum / static_cast<double>(episodes.size());
}

std::string mask_to_hex(std::span<const std::uint8_t> mask) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex;
  for (std::size_t byte = 0; byte * 8 < mask.size(); ++byte) {
    unsigned v = 0;
    for (std::size_t bit = 0; bit < 8 && byte * 8 + bit < mask.size(); ++bit)
      if (mask[byte * 8 + bit]) v |= 1u << bit;
    hex += digits[v >> 4];
    hex += digits[v & 0xF];
  }
  return hex;
}

std::vector<std::uint8_t> mask_from_hex(const std::string& hex, std::size_t positions) {
  require(hex.size() == 2 * ((positions + 7) / 8), ErrorKind::FormatError,
          "mask hex length does not match " + std::to_string(positions) + " positions");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    fail(ErrorKind::FormatError, std::string("bad hex digit '") + c + "'");
  };
  std::vector<std::uint8_t> mask(positions, 0);
  for (std::size_t p = 0; p < positions; ++p) {
    const unsigned byte = nibble(hex[2 * (p / 8)]) << 4 | nibble(hex[2 * (p / 8) + 1]);
    mask[p] = static_cast<std::uint8_t>((byte >> (p % 8)) & 1u);
  }
  for (std::size_t p = positions; p < 8 * ((positions + 7) / 8); ++p) {
    const unsigned byte = nibble(hex[2 * (p / 8)]) << 4 | nibble(hex[2 * (p / 8) + 1]);
    require(((byte >> (p % 8)) & 1u) == 0, ErrorKind::FormatError, "mask has bits past its length");
  }
  return mask;
}

}  // namespace dnnshield::accel
