#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dnnshield/accel_sim.hpp"
#include "dnnshield/attack.hpp"
#include "dnnshield/detector.hpp"
#include "dnnshield/pipeline.hpp"
#include "json.hpp"

namespace dnnshield {

using nlohmann::json;

json to_json(const SparsifierParams& p);
SparsifierParams sparsifier_params_from_json(const json& j, SparsifierParams defaults = {});

json to_json(const DetectionConfig& c);
DetectionConfig detection_config_from_json(const json& j);

json to_json(const Percentiles& p);
json to_json(const CalibrationReport& r);
/// Accepts either a bare DetectionConfig or a CalibrationReport (uses its "config").
DetectionConfig detection_config_from_file_json(const json& j);

json to_json(const accel::AccelConfig& c);
accel::AccelConfig accel_config_from_json(const json& j, accel::AccelConfig defaults = {});
json to_json(const accel::SimReport& r);

json to_json(const pipeline::DetectionStats& s);

/// Verdict CSV: input_id,label,runs_used,mean_l1,terminated_by
std::string verdict_csv_header();
std::string verdict_csv_row(std::size_t input_id, const DetectionVerdict& v);

struct VerdictRow {
  std::size_t input_id = 0;
  Verdict label = Verdict::Benign;
  std::size_t runs_used = 0;
  double mean_l1 = 0.0;
  Termination terminated_by = Termination::DefaultBenign;
};
std::vector<VerdictRow> parse_verdict_csv(const std::string& text);

/// Mask dump CSV: input_id,run,layer,filter_id,M,output_positions,mask_hex
std::string mask_dump_header();
std::string mask_dump_rows(std::size_t input_id, std::size_t run,
                           std::span<const accel::LayerWorkload> layers);
/// Episodes keyed by input id (ascending) with runs in order.
std::vector<std::pair<std::size_t, accel::EpisodeWorkload>> parse_mask_dump(const std::string& text);

/// Attack sidecar CSV: input_id,kind,k,beta,success,L0,L1,L2,Linf,z_gap
std::string attack_csv_header();
std::string attack_csv_row(std::size_t input_id, const AttackConfig& config, const AttackResult& r);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

}  // namespace dnnshield
