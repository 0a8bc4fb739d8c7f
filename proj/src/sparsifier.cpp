#include "dnnshield/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dnnshield/binary.hpp"
#include "dnnshield/error.hpp"

namespace dnnshield {

namespace {

std::vector<std::uint32_t> magnitude_order(const std::vector<float>& weights) {
  std::vector<std::uint32_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const float ma = std::abs(weights[a]), mb = std::abs(weights[b]);
    return ma != mb ? ma < mb : a < b;
  });
  return order;
}

}  // namespace

std::size_t ThresholdTable::drop_count(std::size_t level, std::size_t weight_count) const {
  const std::size_t span = levels - 1;
  return (level * weight_count + span - 1) / span;
}

std::size_t ThresholdTable::level_for(double drop_fraction) const {
  const double clamped = std::clamp(drop_fraction, 0.0, 1.0);
  return static_cast<std::size_t>(std::lround(clamped * static_cast<double>(levels - 1)));
}

void ThresholdTable::check_against(const Model& model) const {
  const auto keys = model.filter_keys();
  require(keys.size() == filters.size(), ErrorKind::PlanMismatch,
          "threshold table covers " + std::to_string(filters.size()) + " filters, model has " +
              std::to_string(keys.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    require(filters[i].key == keys[i], ErrorKind::PlanMismatch,
            "threshold table entry " + std::to_string(i) + " does not match the model");
  }
}

ThresholdTable profile_thresholds(const Model& model, std::size_t levels) {
  require(levels >= 2, ErrorKind::InvalidArgument, "at least two sparsification levels required");
  const auto keys = model.filter_keys();
  require(!keys.empty(), ErrorKind::InvalidArgument, "model has no conv/fc filters");
  ThresholdTable table;
  table.levels = levels;
  for (const FilterKey& key : keys) {
    const auto& weights = model.layers[key.layer].filters[key.index].weights.data;
    require(!weights.empty(), ErrorKind::EmptyFilter,
            "filter " + std::to_string(key.id) + " in layer " + std::to_string(key.layer));
    FilterProfile profile{key, std::vector<float>(levels, 0.0f), magnitude_order(weights)};
    for (std::size_t level = 1; level < levels; ++level) {
      const std::size_t n = table.drop_count(level, weights.size());
      profile.thresholds[level] = n == 0 ? 0.0f : std::abs(weights[profile.order[n - 1]]);
    }
    table.filters.push_back(std::move(profile));
  }
  return table;
}

void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path) {
  binary::Writer w;
  w.magic("THRT");
  w.u32(static_cast<std::uint32_t>(table.levels));
  w.u32(static_cast<std::uint32_t>(table.filters.size()));
  for (const FilterProfile& p : table.filters) {
    w.u32(static_cast<std::uint32_t>(p.key.layer));
    w.u32(static_cast<std::uint32_t>(p.key.id));
    w.u32(static_cast<std::uint32_t>(p.key.weight_count));
    for (float t : p.thresholds) w.f32(t);
  }
  binary::write_file(path.string(), w.bytes());
}

ThresholdTable load_threshold_table(const std::filesystem::path& path, const Model& model) {
  const auto bytes = binary::read_file(path.string());
  binary::Reader r(bytes, path.string());
  r.expect_magic("THRT");
  ThresholdTable table;
  table.levels = r.u32();
  require(table.levels >= 2, ErrorKind::FormatError, path.string() + ": fewer than two levels");
  const std::uint32_t count = r.u32();
  const auto keys = model.filter_keys();
  require(count == keys.size(), ErrorKind::FormatError,
          path.string() + ": filter count does not match the model");
  for (std::uint32_t i = 0; i < count; ++i) {
    FilterProfile p;
    p.key.layer = r.u32();
    p.key.id = static_cast<int>(r.u32());
    p.key.weight_count = r.u32();
    require(p.key.layer == keys[i].layer && p.key.id == keys[i].id &&
                p.key.weight_count == keys[i].weight_count,
            ErrorKind::FormatError, path.string() + ": entry " + std::to_string(i) +
                                        " does not match the model");
    p.key.index = keys[i].index;
    p.thresholds.resize(table.levels);
    for (float& t : p.thresholds) t = r.f32();
    p.order = magnitude_order(model.layers[p.key.layer].filters[p.key.index].weights.data);
    table.filters.push_back(std::move(p));
  }
  require(r.remaining() == 0, ErrorKind::FormatError, path.string() + ": trailing bytes");
  return table;
}

void SparsifierParams::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::InvalidArgument, "lambda must be in [0,1]");
  require(gamma > 0.0, ErrorKind::InvalidArgument, "gamma must be > 0");
  require(levels >= 2, ErrorKind::InvalidArgument, "levels must be >= 2");
  require(fixed_cap >= 0.0 && fixed_cap <= 1.0, ErrorKind::InvalidArgument,
          "fixed cap must be in [0,1]");
}

double sr_cap_from_confidence(double z_gap, const SparsifierParams& params) {
  require(z_gap >= 0.0, ErrorKind::DomainError, "z_gap must be >= 0");
  return params.lambda * -std::expm1(-params.gamma * z_gap);
}

double sr_cap_for(double z_gap, const SparsifierParams& params) {
  return params.policy == CapPolicy::Fixed ? params.fixed_cap
                                           : sr_cap_from_confidence(z_gap, params);
}

RateVector sample_rates(double sr_max, std::size_t filter_count, CounterRng& rng) {
  require(sr_max >= 0.0 && sr_max <= 1.0, ErrorKind::DomainError, "sr_max must be in [0,1]");
  RateVector rates;
  rates.cap = sr_max;
  rates.drop.resize(filter_count);
  for (double& d : rates.drop) d = sr_max * rng.uniform();
  return rates;
}

SparsityPlan build_plan(const Model& model, const RateVector& rates, const ThresholdTable& table) {
  table.check_against(model);
  require(rates.drop.size() == table.filters.size(), ErrorKind::PlanMismatch,
          "rate vector covers " + std::to_string(rates.drop.size()) + " filters, table has " +
              std::to_string(table.filters.size()));
  SparsityPlan plan;
  plan.filters.reserve(table.filters.size());
  for (std::size_t i = 0; i < table.filters.size(); ++i) {
    const FilterProfile& profile = table.filters[i];
    const std::size_t n = profile.key.weight_count;
    const std::size_t level = table.level_for(rates.drop[i]);
    const std::size_t drops = table.drop_count(level, n);
    FilterMask mask{profile.key.layer, profile.key.id, std::vector<std::uint8_t>(n, 1), n - drops,
                    profile.thresholds[level]};
    for (std::size_t j = 0; j < drops; ++j) mask.active[profile.order[j]] = 0;
    plan.filters.push_back(std::move(mask));
  }
  return plan;
}

}  // namespace dnnshield
