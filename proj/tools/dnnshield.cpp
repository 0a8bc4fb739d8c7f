// dnnshield: one subcommand per pipeline stage.
//
// Exit codes: 0 ok, 2 usage error, 3 data error (structured JSON on stderr), 4 other.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dnnshield/accel_sim.hpp"
#include "dnnshield/attack.hpp"
#include "dnnshield/binary.hpp"
#include "dnnshield/detector.hpp"
#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"
#include "dnnshield/fixture.hpp"
#include "dnnshield/io.hpp"
#include "dnnshield/pipeline.hpp"
#include "dnnshield/serialize.hpp"
#include "dnnshield/sparsifier.hpp"
#include "dnnshield/train.hpp"

#ifndef DNNSHIELD_VERSION
#define DNNSHIELD_VERSION "0.0.0"
#endif

using namespace dnnshield;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("DNNSHIELD_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw UsageError(std::string("DNNSHIELD_SEED is not an integer: '") + s + "'");
    }
  }
  return 1;
}

struct Common {
  std::string model, dataset, config, out, format;
  std::optional<std::uint64_t> seed_flag;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

// Resolved values, inputs and outputs of one run; written next to the primary output.
struct Manifest {
  std::string command;
  json resolved = json::object();
  json inputs = json::object();
  json outputs = json::object();
};

void write_text(const fs::path& p, const std::string& text) {
  binary::write_file(p.string(), std::vector<char>(text.begin(), text.end()));
}

std::string read_text(const std::string& p) {
  const auto bytes = binary::read_file(p);
  return std::string(bytes.begin(), bytes.end());
}

json read_json(const std::string& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, p + ": " + e.what());
  }
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

// Precedence: flag > config file section > default.
template <class T>
T pick(const std::optional<T>& flag, const json& file, const char* key, T fallback) {
  if (flag) return *flag;
  if (file.is_object() && file.contains(key)) return file[key].get<T>();
  return fallback;
}

struct SparsifierFlags {
  std::optional<double> lambda, gamma, fixed_cap;
  std::optional<std::size_t> levels;
  std::optional<std::string> policy;

  void attach(CLI::App* app) {
    app->add_option("--lambda", lambda, "upper bound of the adaptive cap");
    app->add_option("--gamma", gamma, "confidence sensitivity of the cap");
    app->add_option("--levels", levels, "sparsification levels in the threshold table");
    app->add_option("--policy", policy, "cap policy")->check(CLI::IsMember({"adaptive", "fixed"}));
    app->add_option("--fixed-cap", fixed_cap, "cap used by the fixed policy");
  }

  SparsifierParams resolve(SparsifierParams p) const {
    if (lambda) p.lambda = *lambda;
    if (gamma) p.gamma = *gamma;
    if (levels) p.levels = *levels;
    if (policy) p.policy = *policy == "fixed" ? CapPolicy::Fixed : CapPolicy::Adaptive;
    if (fixed_cap) p.fixed_cap = *fixed_cap;
    p.validate();
    return p;
  }
};

SparsifierParams sparsifier_from_file(const std::string& path) {
  if (path.empty()) return {};
  const json j = read_json(path);
  if (j.contains("config") && j["config"].contains("sparsifier"))
    return sparsifier_params_from_json(j["config"]["sparsifier"]);
  if (j.contains("sparsifier")) return sparsifier_params_from_json(j["sparsifier"]);
  return sparsifier_params_from_json(j);
}

accel::AccelConfig accel_from(const std::string& path, const std::optional<std::size_t>& tiles,
                              const std::optional<std::size_t>& k, const std::optional<std::size_t>& m,
                              const std::optional<std::size_t>& w) {
  accel::AccelConfig c;
  if (!path.empty()) c = accel_config_from_json(read_json(path));
  if (tiles) c.tiles = *tiles;
  if (k) c.filters_per_tile = *k;
  if (m) c.lanes_per_filter = *m;
  if (w) c.lookahead = *w;
  c.validate();
  return c;
}

std::vector<std::size_t> correctly_classified(const Model& model, const LabeledDataset& ds) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (argmax(forward(model, ds.inputs[i]).logits) == ds.labels[i]) out.push_back(i);
  return out;
}

std::vector<Tensor> select(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<Tensor> out;
  for (std::size_t i : idx) out.push_back(ds.inputs[i]);
  return out;
}

ThresholdTable table_for(const Model& model, const std::string& table_path, std::size_t levels) {
  if (!table_path.empty()) {
    ThresholdTable t = load_threshold_table(table_path, model);
    require(t.levels == levels, ErrorKind::InvalidArgument,
            "threshold table has " + std::to_string(t.levels) + " levels, config needs " +
                std::to_string(levels));
    return t;
  }
  return profile_thresholds(model, levels);
}

json percentiles_json(std::vector<double> v) { return to_json(percentiles(v)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial input detection by random weight sparsification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DNNSHIELD_VERSION);

  Common c;
  std::string manifest_path;
  auto common = [&](CLI::App* sub, bool model, bool dataset, bool config) {
    if (model) sub->add_option("--model", c.model, "model manifest (JSON)");
    if (dataset) sub->add_option("--dataset", c.dataset, "dataset file");
    if (config) sub->add_option("--config", c.config, "JSON configuration file");
    sub->add_option("--seed", c.seed_flag, "base seed (default: $DNNSHIELD_SEED or 1)");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "primary output path")->required();
    sub->add_option("--format", c.format, "output format (default: csv for a .csv --out, else json)")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--manifest", manifest_path, "run manifest path (default: <out>.manifest.json)");
  };

  // make-dataset
  auto* make = app.add_subcommand("make-dataset", "synthetic 4-class 12x12 image set");
  std::size_t count = fixture::kTrainCount;
  std::optional<std::uint64_t> dataset_seed;
  common(make, false, false, false);
  make->add_option("--count", count)->check(CLI::PositiveNumber);
  make->add_option("--dataset-seed", dataset_seed, "content seed (default: --seed)");

  // train-fixture
  auto* train = app.add_subcommand("train-fixture", "train the fixture CNN");
  std::optional<std::size_t> epochs;
  std::optional<double> train_lr;
  common(train, false, true, true);
  train->add_option("--epochs", epochs);
  train->add_option("--lr", train_lr);

  // profile
  auto* profile = app.add_subcommand("profile", "offline threshold table");
  std::optional<std::size_t> profile_levels;
  common(profile, true, false, true);
  profile->add_option("--levels", profile_levels);

  // attack
  auto* attack = app.add_subcommand("attack", "adversarial corpus plus CSV sidecar");
  std::string attack_kind = "cw", target = "next";
  std::optional<double> k, cw_c, attack_lr, epsilon;
  std::optional<std::size_t> iters;
  bool untargeted = false, keep_failures = false;
  common(attack, true, true, true);
  attack->add_option("--kind", attack_kind)->check(CLI::IsMember({"cw", "fgsm"}));
  attack->add_option("--k", k, "logit margin demanded on success");
  attack->add_option("--c", cw_c, "weight of the margin loss");
  attack->add_option("--iters", iters);
  attack->add_option("--lr", attack_lr);
  attack->add_option("--epsilon", epsilon, "FGSM step");
  attack->add_option("--target", target)->check(CLI::IsMember({"next", "ll"}));
  attack->add_flag("--untargeted", untargeted);
  attack->add_flag("--keep-failures", keep_failures);

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "fit detection thresholds");
  std::string adversarial_path, table_path;
  std::optional<double> fast_cov, slow_cov;
  std::optional<std::size_t> max_runs;
  SparsifierFlags sflags;
  common(calib, true, true, true);
  calib->add_option("--adversarial", adversarial_path, "adversarial corpus")->required();
  calib->add_option("--table", table_path, "threshold table (default: profile on the fly)");
  calib->add_option("--fast-coverage", fast_cov);
  calib->add_option("--slow-coverage", slow_cov);
  calib->add_option("--max-runs", max_runs);
  sflags.attach(calib);

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "verdict stream for a dataset");
  std::string dump_masks;
  common(detect_cmd, true, true, true);
  detect_cmd->add_option("--table", table_path);
  detect_cmd->add_option("--dump-masks", dump_masks, "write the masks of every noisy run");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "detection rate and FPR tables");
  std::vector<std::string> adversarial_sets;
  bool compare_fixed = false, simulate_flag = false;
  std::string accel_path;
  std::optional<std::size_t> tiles, filters_per_tile, lanes, lookahead;
  common(eval, true, true, true);
  eval->add_option("--adversarial", adversarial_sets, "adversarial corpora")->required();
  eval->add_option("--table", table_path);
  eval->add_flag("--compare-fixed", compare_fixed, "also calibrate fixed caps 0.2 and 0.8");
  eval->add_flag("--simulate", simulate_flag, "add the simulated detection overhead");
  eval->add_option("--accel-config", accel_path);

  // simulate
  auto* sim = app.add_subcommand("simulate", "accelerator cycles of recorded masks");
  std::string masks_path, verdicts_path;
  common(sim, true, true, true);
  sim->add_option("--masks", masks_path, "mask dump from detect --dump-masks");
  sim->add_option("--verdicts", verdicts_path, "verdict CSV; masks are regenerated (needs --model --dataset --config)");
  sim->add_option("--accel-config", accel_path);
  for (auto* s : {eval, sim}) {
    s->add_option("--tiles", tiles);
    s->add_option("--filters-per-tile", filters_per_tile);
    s->add_option("--lanes", lanes);
    s->add_option("--lookahead", lookahead);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  Manifest m;
  try {
    c.seed = c.seed_flag ? *c.seed_flag : default_seed();
    if (c.format.empty()) c.format = fs::path(c.out).extension() == ".csv" ? "csv" : "json";
    const fs::path out = c.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const json file_cfg = c.config.empty() ? json::object() : read_json(c.config);
    if (!c.config.empty()) m.inputs["config"] = c.config;
    if (!c.model.empty()) m.inputs["model"] = c.model;
    if (!c.dataset.empty()) m.inputs["dataset"] = c.dataset;
    m.outputs["primary"] = c.out;

    if (*make) {
      m.command = "make-dataset";
      const std::uint64_t s = dataset_seed.value_or(c.seed);
      save_dataset(fixture::synthetic_dataset(count, s), out);
      m.resolved = {{"count", count}, {"dataset_seed", s}};
    } else if (*train) {
      m.command = "train-fixture";
      const LabeledDataset ds =
          c.dataset.empty() ? fixture::synthetic_dataset(fixture::kTrainCount, fixture::kTrainSeed)
                            : load_dataset(c.dataset);
      TrainOptions opt = fixture::training(c.seed);
      const json tc = file_cfg.value("training", json::object());
      opt.epochs = pick(epochs, tc, "epochs", opt.epochs);
      opt.learning_rate = pick(train_lr, tc, "learning_rate", opt.learning_rate);
      opt.batch_size = pick<std::size_t>(std::nullopt, tc, "batch_size", opt.batch_size);
      const Model model = train_fixture(ds, fixture::architecture(), opt);
      save_model(model, out);
      m.resolved = {{"epochs", opt.epochs}, {"learning_rate", opt.learning_rate},
                    {"batch_size", opt.batch_size}, {"train_accuracy", *model.train_accuracy}};
    } else if (*profile) {
      m.command = "profile";
      need(c.model, "--model");
      const Model model = load_model(c.model);
      const std::size_t levels = profile_levels.value_or(sparsifier_from_file(c.config).levels);
      save_threshold_table(profile_thresholds(model, levels), out);
      m.resolved = {{"levels", levels}};
    } else if (*attack) {
      m.command = "attack";
      need(c.model, "--model");
      need(c.dataset, "--dataset");
      const Model model = load_model(c.model);
      const LabeledDataset ds = load_dataset(c.dataset);
      const json ac = file_cfg.value("attack", json::object());
      AttackConfig cfg;
      cfg.kind = attack_kind == "fgsm" ? AttackKind::Fgsm : AttackKind::CwL2;
      cfg.k = pick(k, ac, "k", cfg.k);
      cfg.c = pick(cw_c, ac, "c", cfg.c);
      cfg.iters = pick(iters, ac, "iters", cfg.iters);
      cfg.lr = pick(attack_lr, ac, "lr", cfg.lr);
      cfg.epsilon = pick(epsilon, ac, "epsilon", cfg.epsilon);
      cfg.target = target == "ll" ? TargetMode::least_likely() : TargetMode::next();
      cfg.targeted = !untargeted;
      cfg.seed = c.seed;
      const auto corpus = pipeline::attack_corpus(model, ds, cfg, c.jobs, keep_failures);
      LabeledDataset adv;
      std::string csv = attack_csv_header();
      for (const auto& e : corpus) {
        adv.inputs.push_back(e.result.adversarial);
        adv.labels.push_back(ds.labels[e.source_index]);
        csv += attack_csv_row(e.source_index, cfg, e.result);
      }
      require(!adv.inputs.empty(), ErrorKind::EmptyCorpus, "no successful adversarial examples");
      save_dataset(adv, out);
      write_text(c.out + ".csv", csv);
      m.outputs["sidecar"] = c.out + ".csv";
      m.resolved = {{"kind", attack_kind}, {"k", cfg.k}, {"c", cfg.c}, {"iters", cfg.iters},
                    {"lr", cfg.lr}, {"epsilon", cfg.epsilon}, {"target", target},
                    {"targeted", cfg.targeted}, {"corpus_size", adv.size()},
                    {"source_size", ds.size()}};
    } else if (*calib) {
      m.command = "calibrate";
      need(c.model, "--model");
      need(c.dataset, "--dataset");
      const Model model = load_model(c.model);
      const LabeledDataset benign_ds = load_dataset(c.dataset);
      const LabeledDataset adv_ds = load_dataset(adversarial_path);
      m.inputs["adversarial"] = adversarial_path;
      DetectionConfig base;
      base.seed = c.seed;
      base.sparsifier = sflags.resolve(sparsifier_from_file(c.config));
      base.max_runs = pick(max_runs, file_cfg, "max_runs", base.max_runs);
      const double fast = pick(fast_cov, file_cfg, "fast_coverage", 0.80);
      const double slow = pick(slow_cov, file_cfg, "slow_coverage", 0.95);
      const ThresholdTable table = table_for(model, table_path, base.sparsifier.levels);
      const auto benign = select(benign_ds, correctly_classified(model, benign_ds));
      require(!benign.empty(), ErrorKind::EmptyCorpus, "no correctly classified benign inputs");
      const auto b = pipeline::first_run_cpdns(model, table, base, benign, c.jobs);
      const auto a = pipeline::first_run_cpdns(model, table, base, adv_ds.inputs, c.jobs);
      const CalibrationReport report = calibrate(b, a, base, fast, slow);
      write_text(out, to_json(report).dump(2) + "\n");
      m.resolved = to_json(report.config);
      m.resolved["benign_count"] = b.size();
      m.resolved["adversarial_count"] = a.size();
    } else if (*detect_cmd) {
      m.command = "detect";
      need(c.model, "--model");
      need(c.dataset, "--dataset");
      need(c.config, "--config");
      const Model model = load_model(c.model);
      const LabeledDataset ds = load_dataset(c.dataset);
      DetectionConfig cfg = detection_config_from_file_json(file_cfg);
      const ThresholdTable table = table_for(model, table_path, cfg.sparsifier.levels);
      const auto episodes = pipeline::detect_all(model, table, cfg, ds.inputs, c.jobs, !dump_masks.empty());
      std::string text;
      if (c.format == "csv") {
        text = verdict_csv_header();
        for (std::size_t i = 0; i < episodes.size(); ++i) text += verdict_csv_row(i, episodes[i].verdict);
      } else {
        json rows = json::array();
        for (std::size_t i = 0; i < episodes.size(); ++i) {
          const auto& v = episodes[i].verdict;
          rows.push_back({{"input_id", i}, {"label", to_string(v.label)}, {"runs_used", v.runs_used},
                          {"mean_l1", v.mean_l1}, {"terminated_by", to_string(v.terminated_by)}});
        }
        text = rows.dump(2) + "\n";
      }
      write_text(out, text);
      if (!dump_masks.empty()) {
        std::string dump = mask_dump_header();
        for (std::size_t i = 0; i < episodes.size(); ++i)
          for (std::size_t r = 0; r < episodes[i].plans.size(); ++r)
            dump += mask_dump_rows(i, r, accel::workloads_from_plan(model, episodes[i].plans[r]));
        write_text(dump_masks, dump);
        m.outputs["masks"] = dump_masks;
      }
      m.resolved = to_json(cfg);
      m.resolved["count"] = episodes.size();
    } else if (*eval) {
      m.command = "evaluate";
      need(c.model, "--model");
      need(c.dataset, "--dataset");
      need(c.config, "--config");
      const Model model = load_model(c.model);
      const LabeledDataset benign_ds = load_dataset(c.dataset);
      const DetectionConfig cfg = detection_config_from_file_json(file_cfg);
      const ThresholdTable table = table_for(model, table_path, cfg.sparsifier.levels);
      const auto benign = select(benign_ds, correctly_classified(model, benign_ds));
      require(!benign.empty(), ErrorKind::EmptyCorpus, "no correctly classified benign inputs");
      std::vector<std::vector<Tensor>> corpora;
      for (const auto& p : adversarial_sets) corpora.push_back(load_dataset(p).inputs);
      m.inputs["adversarial"] = adversarial_sets;

      auto table_row = [&](const DetectionConfig& dc, bool record) {
        json row;
        auto be = pipeline::detect_all(model, table, dc, benign, c.jobs, record);
        const auto bs = pipeline::summarize(be);
        row["benign"] = to_json(bs);
        row["fpr"] = bs.flagged_rate;
        json variants = json::array();
        std::vector<pipeline::Episode> all = std::move(be);
        double runs = bs.mean_runs * static_cast<double>(bs.count);
        std::size_t n = bs.count;
        for (std::size_t i = 0; i < corpora.size(); ++i) {
          auto ae = pipeline::detect_all(model, table, dc, corpora[i], c.jobs, record);
          const auto s = pipeline::summarize(ae);
          variants.push_back({{"name", fs::path(adversarial_sets[i]).filename().string()},
                              {"detection_rate", s.flagged_rate},
                              {"stats", to_json(s)}});
          runs += s.mean_runs * static_cast<double>(s.count);
          n += s.count;
          for (auto& e : ae) all.push_back(std::move(e));
        }
        row["variants"] = variants;
        row["mean_runs"] = runs / static_cast<double>(n);
        if (record) {
          const auto accel_cfg = accel_from(accel_path, tiles, filters_per_tile, lanes, lookahead);
          row["overhead"] = accel::detection_overhead(pipeline::episode_workloads(model, all), accel_cfg);
          row["accel"] = to_json(accel_cfg);
        }
        return row;
      };

      json summary;
      summary["config"] = to_json(cfg);
      summary["benign_count"] = benign.size();
      std::vector<double> b_cpdn = pipeline::first_run_cpdns(model, table, cfg, benign, c.jobs);
      summary["benign_cpdn"] = percentiles_json(b_cpdn);
      summary["detector"] = table_row(cfg, simulate_flag);
      if (compare_fixed) {
        json fixed = json::array();
        std::vector<Tensor> adv_all;
        for (const auto& cp : corpora) adv_all.insert(adv_all.end(), cp.begin(), cp.end());
        for (double cap : {0.2, 0.8}) {
          DetectionConfig base = cfg;
          base.sparsifier.policy = CapPolicy::Fixed;
          base.sparsifier.fixed_cap = cap;
          const auto b = pipeline::first_run_cpdns(model, table, base, benign, c.jobs);
          const auto a = pipeline::first_run_cpdns(model, table, base, adv_all, c.jobs);
          const auto report = calibrate(b, a, base);
          json row = table_row(report.config, false);
          row["fixed_cap"] = cap;
          row["config"] = to_json(report.config);
          fixed.push_back(row);
        }
        summary["fixed"] = fixed;
      }
      if (c.format == "csv") {
        std::string text = "detector,set,count,flagged_rate,mean_runs,single_run_fraction\n";
        auto emit = [&](const std::string& name, const json& row) {
          const json& b = row["benign"];
          text += name + ",benign," + std::to_string(b["count"].get<std::size_t>()) + "," +
                  format_double(b["flagged_rate"]) + "," + format_double(b["mean_runs"]) + "," +
                  format_double(b["single_run_fraction"]) + "\n";
          for (const auto& v : row["variants"]) {
            const json& s = v["stats"];
            text += name + "," + v["name"].get<std::string>() + "," +
                    std::to_string(s["count"].get<std::size_t>()) + "," +
                    format_double(s["flagged_rate"]) + "," + format_double(s["mean_runs"]) + "," +
                    format_double(s["single_run_fraction"]) + "\n";
          }
        };
        emit("detector", summary["detector"]);
        if (compare_fixed)
          for (const auto& row : summary["fixed"])
            emit("fixed-" + format_double(row["fixed_cap"]), row);
        write_text(out, text);
      } else {
        write_text(out, summary.dump(2) + "\n");
      }
      m.resolved = summary["config"];
    } else if (*sim) {
      m.command = "simulate";
      const auto accel_cfg = accel_from(accel_path, tiles, filters_per_tile, lanes, lookahead);
      std::vector<accel::EpisodeWorkload> episodes;
      if (!masks_path.empty()) {
        m.inputs["masks"] = masks_path;
        for (auto& [id, ep] : parse_mask_dump(read_text(masks_path))) episodes.push_back(std::move(ep));
      } else {
        if (verdicts_path.empty()) throw UsageError("one of --masks or --verdicts is required");
        need(c.model, "--model");
        need(c.dataset, "--dataset");
        need(c.config, "--config");
        m.inputs["verdicts"] = verdicts_path;
        const Model model = load_model(c.model);
        const LabeledDataset ds = load_dataset(c.dataset);
        const DetectionConfig cfg = detection_config_from_file_json(file_cfg);
        const ThresholdTable table = profile_thresholds(model, cfg.sparsifier.levels);
        const auto rows = parse_verdict_csv(read_text(verdicts_path));
        std::vector<Tensor> inputs;
        for (const auto& r : rows) {
          require(r.input_id < ds.size(), ErrorKind::FormatError,
                  "verdict input_id " + std::to_string(r.input_id) + " is outside the dataset");
          inputs.push_back(ds.inputs[r.input_id]);
        }
        // Re-running detection on the same stream ids reproduces each episode's masks.
        std::vector<pipeline::Episode> eps(rows.size());
        pipeline::parallel_for(rows.size(), c.jobs, [&](std::size_t i) {
          eps[i].verdict = detect(model, inputs[i], table, cfg,
                                  static_cast<std::uint32_t>(rows[i].input_id), &eps[i].plans);
          require(eps[i].verdict.runs_used == rows[i].runs_used, ErrorKind::FormatError,
                  "verdict for input " + std::to_string(rows[i].input_id) +
                      " does not match this model and config");
        });
        episodes = pipeline::episode_workloads(model, eps);
      }
      require(!episodes.empty(), ErrorKind::EmptyCorpus, "no episodes to simulate");
      accel::AccelConfig dense_cfg = accel_cfg, sparse_cfg = accel_cfg;
      dense_cfg.mode = accel::SimMode::Dense;
      sparse_cfg.mode = accel::SimMode::Sparse;
      accel::SimReport dense, sparse;
      dense.config = dense_cfg;
      sparse.config = sparse_cfg;
      std::size_t runs = 0;
      for (const auto& ep : episodes) {
        dense.merge(accel::simulate_model(ep.runs.front(), dense_cfg));
        for (const auto& r : ep.runs) sparse.merge(accel::simulate_model(r, sparse_cfg));
        runs += ep.runs.size();
      }
      const double overhead = accel::detection_overhead(episodes, accel_cfg);
      if (c.format == "csv") {
        write_text(out, "metric,value\nepisodes," + std::to_string(episodes.size()) + "\nnoisy_runs," +
                            std::to_string(runs) + "\ndense_cycles," + std::to_string(dense.total_cycles) +
                            "\nsparse_cycles," + std::to_string(sparse.total_cycles) +
                            "\nsparse_utilization," + format_double(sparse.utilization) +
                            "\noverhead," + format_double(overhead) + "\n");
      } else {
        json j{{"episodes", episodes.size()}, {"noisy_runs", runs}, {"dense", to_json(dense)},
               {"sparse", to_json(sparse)}, {"overhead", overhead}};
        write_text(out, j.dump(2) + "\n");
      }
      m.resolved = to_json(accel_cfg);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "FormatError"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return 4;
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"command", m.command},
                {"config_path", c.config.empty() ? json(nullptr) : json(c.config)},
                {"seed", c.seed},
                {"jobs", c.jobs},
                {"format", c.format},
                {"inputs", m.inputs},
                {"outputs", m.outputs},
                {"resolved", m.resolved},
                {"tool_version", DNNSHIELD_VERSION},
                {"wall_clock_seconds", secs}};
  try {
    write_text(manifest_path.empty() ? c.out + ".manifest.json" : manifest_path, manifest.dump(2) + "\n");
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
