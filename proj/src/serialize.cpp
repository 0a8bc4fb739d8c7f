#include "dnnshield/serialize.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "dnnshield/error.hpp"

namespace dnnshield {

namespace {

CapPolicy policy_from_string(const std::string& s) {
  if (s == "adaptive") return CapPolicy::Adaptive;
  if (s == "fixed") return CapPolicy::Fixed;
  fail(ErrorKind::FormatError, "unknown cap policy '" + s + "'");
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "Benign") return Verdict::Benign;
  if (s == "Adversarial") return Verdict::Adversarial;
  fail(ErrorKind::FormatError, "unknown verdict label '" + s + "'");
}

Termination termination_from_string(const std::string& s) {
  for (auto t : {Termination::FastPathLow, Termination::FastPathHigh, Termination::MeanLow,
                 Termination::MeanHigh, Termination::DefaultBenign}) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorKind::FormatError, "unknown termination '" + s + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::size_t columns) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = split(line, ',');
    require(fields.size() == columns, ErrorKind::FormatError,
            "expected " + std::to_string(columns) + " CSV columns in '" + line + "'");
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorKind::FormatError,
          "bad integer '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorKind::FormatError,
          "bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

json to_json(const SparsifierParams& p) {
  return json{{"lambda", p.lambda},
              {"gamma", p.gamma},
              {"levels", p.levels},
              {"policy", p.policy == CapPolicy::Adaptive ? "adaptive" : "fixed"},
              {"fixed_cap", p.fixed_cap}};
}

SparsifierParams sparsifier_params_from_json(const json& j, SparsifierParams p) {
  p.lambda = j.value("lambda", p.lambda);
  p.gamma = j.value("gamma", p.gamma);
  p.levels = j.value("levels", p.levels);
  if (j.contains("policy")) p.policy = policy_from_string(j["policy"].get<std::string>());
  p.fixed_cap = j.value("fixed_cap", p.fixed_cap);
  p.validate();
  return p;
}

json to_json(const DetectionConfig& c) {
  return json{{"t1", c.t1},   {"t2", c.t2},           {"t1p", c.t1p},
              {"t2p", c.t2p}, {"max_runs", c.max_runs}, {"sparsifier", to_json(c.sparsifier)},
              {"seed", c.seed}};
}

DetectionConfig detection_config_from_json(const json& j) {
  DetectionConfig c;
  try {
    c.t1 = j.at("t1").get<double>();
    c.t2 = j.at("t2").get<double>();
    c.t1p = j.at("t1p").get<double>();
    c.t2p = j.at("t2p").get<double>();
    c.max_runs = j.at("max_runs").get<std::size_t>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("sparsifier")) c.sparsifier = sparsifier_params_from_json(j["sparsifier"]);
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, std::string("detection config: ") + e.what());
  }
  c.validate();
  return c;
}

DetectionConfig detection_config_from_file_json(const json& j) {
  return detection_config_from_json(j.contains("config") ? j["config"] : j);
}

json to_json(const Percentiles& p) {
  return json{{"count", p.count}, {"p05", p.p05}, {"p20", p.p20},
              {"p50", p.p50},     {"p80", p.p80}, {"p95", p.p95}};
}

json to_json(const CalibrationReport& r) {
  json j{{"config", to_json(r.config)},
         {"fast_coverage", r.fast_coverage},
         {"slow_coverage", r.slow_coverage},
         {"benign_cpdn", to_json(r.benign)},
         {"adversarial_cpdn", to_json(r.adversarial)},
         {"overlap", r.overlap}};
  j["tpr"] = r.tpr ? json(*r.tpr) : json(nullptr);
  j["fpr"] = r.fpr ? json(*r.fpr) : json(nullptr);
  return j;
}

json to_json(const accel::AccelConfig& c) {
  return json{{"tiles", c.tiles},
              {"filters_per_tile", c.filters_per_tile},
              {"lanes_per_filter", c.lanes_per_filter},
              {"lookahead", c.lookahead},
              {"mode", c.mode == accel::SimMode::Dense ? "dense" : "sparse"}};
}

accel::AccelConfig accel_config_from_json(const json& j, accel::AccelConfig c) {
  c.tiles = j.value("tiles", c.tiles);
  c.filters_per_tile = j.value("filters_per_tile", c.filters_per_tile);
  c.lanes_per_filter = j.value("lanes_per_filter", c.lanes_per_filter);
  c.lookahead = j.value("lookahead", c.lookahead);
  if (j.contains("mode")) {
    const auto m = j["mode"].get<std::string>();
    require(m == "dense" || m == "sparse", ErrorKind::FormatError, "mode must be dense|sparse");
    c.mode = m == "dense" ? accel::SimMode::Dense : accel::SimMode::Sparse;
  }
  c.validate();
  return c;
}

json to_json(const accel::SimReport& r) {
  return json{{"config", to_json(r.config)},
              {"total_cycles", r.total_cycles},
              {"mac_ops", r.mac_ops},
              {"utilization", r.utilization},
              {"stall_cycles", r.stall_cycles},
              {"groups", r.group_cycles.size()}};
}

json to_json(const pipeline::DetectionStats& s) {
  return json{{"count", s.count},
              {"flagged_rate", s.flagged_rate},
              {"mean_runs", s.mean_runs},
              {"single_run_fraction", s.single_run_fraction},
              {"first_cpdn", to_json(s.first_cpdn)}};
}

std::string verdict_csv_header() { return "input_id,label,runs_used,mean_l1,terminated_by\n"; }

std::string verdict_csv_row(std::size_t input_id, const DetectionVerdict& v) {
  return std::to_string(input_id) + "," + std::string(to_string(v.label)) + "," +
         std::to_string(v.runs_used) + "," + format_double(v.mean_l1) + "," +
         std::string(to_string(v.terminated_by)) + "\n";
}

std::vector<VerdictRow> parse_verdict_csv(const std::string& text) {
  std::vector<VerdictRow> rows;
  for (const auto& f : csv_rows(text, 5)) {
    rows.push_back(VerdictRow{to_size(f[0]), verdict_from_string(f[1]), to_size(f[2]),
                              to_double(f[3]), termination_from_string(f[4])});
  }
  return rows;
}

std::string mask_dump_header() { return "input_id,run,layer,filter_id,M,output_positions,mask_hex\n"; }

std::string mask_dump_rows(std::size_t input_id, std::size_t run,
                           std::span<const accel::LayerWorkload> layers) {
  std::string out;
  for (const auto& layer : layers) {
    for (const auto& job : layer.jobs) {
      out += std::to_string(input_id) + "," + std::to_string(run) + "," +
             std::to_string(layer.layer) + "," + std::to_string(job.filter_id) + "," +
             std::to_string(job.positions()) + "," + std::to_string(layer.output_positions) + "," +
             accel::mask_to_hex(job.mask) + "\n";
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, accel::EpisodeWorkload>> parse_mask_dump(const std::string& text) {
  // input -> run -> layer -> workload
  std::map<std::size_t, std::map<std::size_t, std::map<std::size_t, accel::LayerWorkload>>> tree;
  for (const auto& f : csv_rows(text, 7)) {
    const std::size_t input = to_size(f[0]), run = to_size(f[1]), layer = to_size(f[2]);
    const std::size_t positions = to_size(f[4]);
    require(positions >= 1, ErrorKind::FormatError, "M must be >= 1");
    auto& w = tree[input][run][layer];
    w.layer = layer;
    w.output_positions = to_size(f[5]);
    w.jobs.push_back(accel::FilterJob::from_mask(static_cast<int>(to_size(f[3])),
                                                 accel::mask_from_hex(f[6], positions)));
  }
  std::vector<std::pair<std::size_t, accel::EpisodeWorkload>> out;
  for (auto& [input, runs] : tree) {
    accel::EpisodeWorkload ep;
    std::size_t expected = 0;
    for (auto& [run, layers] : runs) {
      require(run == expected++, ErrorKind::FormatError,
              "mask dump runs for input " + std::to_string(input) + " are not contiguous");
      std::vector<accel::LayerWorkload> run_layers;
      for (auto& [l, w] : layers) run_layers.push_back(std::move(w));
      ep.runs.push_back(std::move(run_layers));
    }
    out.emplace_back(input, std::move(ep));
  }
  return out;
}

std::string attack_csv_header() { return "input_id,kind,k,beta,success,L0,L1,L2,Linf,z_gap\n"; }

std::string attack_csv_row(std::size_t input_id, const AttackConfig& config, const AttackResult& r) {
  return std::to_string(input_id) + "," + std::string(to_string(config.kind)) + "," +
         format_double(config.k) + "," + format_double(config.beta) + "," +
         (r.success ? "1" : "0") + "," + format_double(r.distortion.l0) + "," +
         format_double(r.distortion.l1) + "," + format_double(r.distortion.l2) + "," +
         format_double(r.distortion.linf) + "," + format_double(r.confidence) + "\n";
}

}  // namespace dnnshield
