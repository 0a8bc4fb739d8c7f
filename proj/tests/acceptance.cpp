// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4] [--xfail 5,8] [--cli path/to/dnnshield] [--jobs N]
//
// Exit status is 0 when every criterion outside the xfail list passes and every
// criterion inside it fails. An xfail criterion that starts passing is an error too.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dnnshield/accel_sim.hpp"
#include "dnnshield/attack.hpp"
#include "dnnshield/detector.hpp"
#include "dnnshield/engine.hpp"
#include "dnnshield/fixture.hpp"
#include "dnnshield/pipeline.hpp"
#include "dnnshield/sparsifier.hpp"
#include "dnnshield/stats.hpp"
#include "dnnshield/train.hpp"
#include "support/oracles.hpp"

using namespace dnnshield;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFdStep = 1e-3;
constexpr double kFdRelTol = 1e-3;
constexpr double kFdFloor = 1e-4;  // denominator floor for near-zero derivatives
constexpr double kRadiusTol = 1e-4;
constexpr double kMinAccuracy = 0.95;
constexpr double kMannWhitneyAlpha = 0.01;
constexpr double kSingleRunMin = 0.75;
constexpr double kRobustnessBand = 0.15;
constexpr double kSpearmanMin = 0.8;
constexpr double kOverheadLo = 1.3, kOverheadHi = 3.0;

constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

Outcome masked_forward_equivalence() {
  CounterRng rng(kSeed, StreamDomain::Workload, 1);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Model model = oracle::random_model(rng);
    const SparsityPlan plan = oracle::random_plan(model, rng);
    const Tensor x = oracle::random_input(model.input_shape, rng);
    const Inference masked = forward_masked(model, x, plan);
    const Inference zeroed = forward(oracle::zeroed_clone(model, plan), x);
    if (!same_bits(masked.logits, zeroed.logits) || !same_bits(masked.probs, zeroed.probs))
      ++mismatches;
  }
  return {mismatches == 0, fmt("%zu/100 triples differ", mismatches)};
}

LossSpec random_loss(const Model& model, const Tensor& x, int which, CounterRng& rng) {
  const std::size_t classes = model.num_classes;
  const auto t = static_cast<std::size_t>(rng.below(classes));
  switch (which % 3) {
    case 0:
      return CrossEntropyLoss{t};
    case 1:
      return CwLoss{t, static_cast<float>(rng.uniform(0.0, 2.0)), rng.below(2) == 0};
    default: {
      MimicryLoss m;
      m.cw = CwLoss{t, 0.5f, true};
      m.c = static_cast<float>(rng.uniform(0.5, 2.0));
      m.beta = static_cast<float>(rng.uniform(0.1, 2.0));
      std::vector<float> p(classes);
      for (float& v : p) v = static_cast<float>(rng.uniform(0.05, 1.0));
      const float s = std::accumulate(p.begin(), p.end(), 0.0f);
      for (float& v : p) v /= s;
      m.target_probs = p;
      m.origin = x;
      for (float& v : m.origin.data) v = std::clamp(v + static_cast<float>(rng.uniform(-0.2, 0.2)), 0.0f, 1.0f);
      return m;
    }
  }
}

Outcome gradient_check() {
  CounterRng rng(kSeed, StreamDomain::Workload, 2);
  std::size_t checked = 0, bad = 0, kinks = 0;
  double worst = 0.0;
  for (int m = 0; m < 5; ++m) {
    const Model model = oracle::random_model(rng);
    std::size_t done = 0;
    int draw = 0;
    while (done < 20) {
      const Tensor x = oracle::random_input(model.input_shape, rng);
      const LossSpec loss = random_loss(model, x, draw++, rng);
      const Tensor grad = gradient_wrt_input(model, x, loss);
      std::vector<double> xd(x.data.begin(), x.data.end());
      const std::size_t i = rng.below(xd.size());
      std::vector<int> sig_plus, sig_minus, sig_mid;
      std::vector<double> xp = xd, xm = xd;
      xp[i] += kFdStep;
      xm[i] -= kFdStep;
      const double fp = oracle::reference_loss(model, xp, loss, &sig_plus);
      const double fm = oracle::reference_loss(model, xm, loss, &sig_minus);
      oracle::reference_loss(model, xd, loss, &sig_mid);
      if (sig_plus != sig_mid || sig_minus != sig_mid) {
        ++kinks;  // a ReLU, pooling or loss branch switches inside the stencil
        continue;
      }
      const double fd = (fp - fm) / (2.0 * kFdStep);
      const double g = grad.data[i];
      const double rel = std::abs(g - fd) / std::max({std::abs(fd), std::abs(g), kFdFloor});
      worst = std::max(worst, rel);
      bad += rel > kFdRelTol;
      ++checked;
      ++done;
    }
  }
  return {bad == 0, fmt("%zu coords, %zu over tolerance, worst rel %.2e, %zu kinks skipped",
                        checked, bad, worst, kinks)};
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Outcome radius_anchors() {
  const double r = certified_radius(phi(1.0), phi(-1.0), 1.0);
  bool monotone = true;
  double prev = -1e300;
  for (int i = 0; i < 50; ++i) {
    const double p1 = 0.30 + 0.69 * i / 49.0;
    const double v = certified_radius(p1, 0.2, 1.0);
    monotone = monotone && v > prev;
    prev = v;
  }
  return {std::abs(r - 1.0) <= kRadiusTol && monotone,
          fmt("R = %.8f, monotone on 50 points: %s", r, monotone ? "yes" : "no")};
}

// Trained fixture, benign set and CW corpora shared by the fixture-level criteria.
struct Fixture {
  Model model;
  ThresholdTable table;
  double test_accuracy = 0.0;
  std::vector<Tensor> benign;
  std::vector<std::size_t> benign_labels;
  std::vector<std::vector<pipeline::CorpusEntry>> corpora;  // k = 0, 2, 5
  LabeledDataset test;
};

constexpr double kConfidences[] = {0.0, 2.0, 5.0};

Fixture build_fixture(std::size_t jobs) {
  Fixture f;
  const auto train = fixture::synthetic_dataset(fixture::kTrainCount, fixture::kTrainSeed);
  f.test = fixture::synthetic_dataset(fixture::kTestCount, fixture::kTestSeed);
  f.model = train_fixture(train, fixture::architecture(), fixture::training(kSeed));
  f.test_accuracy = accuracy(f.model, f.test);
  f.table = profile_thresholds(f.model, fixture::sparsifier().levels);
  for (std::size_t i = 0; i < f.test.size(); ++i) {
    if (argmax(forward(f.model, f.test.inputs[i]).logits) == f.test.labels[i]) {
      f.benign.push_back(f.test.inputs[i]);
      f.benign_labels.push_back(f.test.labels[i]);
    }
  }
  AttackConfig ac;
  ac.seed = kSeed;
  for (double k : kConfidences) {
    ac.k = k;
    f.corpora.push_back(pipeline::attack_corpus(f.model, f.test, ac, jobs));
  }
  return f;
}

std::vector<Tensor> adversarials(const std::vector<pipeline::CorpusEntry>& corpus, int parity) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (parity < 0 || static_cast<int>(i % 2) == parity) out.push_back(corpus[i].result.adversarial);
  return out;
}

std::vector<Tensor> half(const std::vector<Tensor>& v, int parity) {
  std::vector<Tensor> out;
  for (std::size_t i = parity; i < v.size(); i += 2) out.push_back(v[i]);
  return out;
}

std::vector<Tensor> mixed(const Fixture& f, int parity) {
  std::vector<Tensor> out;
  for (const auto& c : f.corpora) {
    auto a = adversarials(c, parity);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

DetectionConfig adaptive_base() {
  DetectionConfig c;
  c.seed = kSeed;
  c.sparsifier = fixture::sparsifier();
  return c;
}

DetectionConfig fixed_base(double cap) {
  DetectionConfig c = adaptive_base();
  c.sparsifier.policy = CapPolicy::Fixed;
  c.sparsifier.fixed_cap = cap;
  return c;
}

// Calibrated on the even halves, evaluated on the odd halves.
struct Evaluated {
  CalibrationReport report;
  pipeline::DetectionStats benign;
  pipeline::DetectionStats mixed;
  std::vector<double> per_k;  // detection rate on each confidence corpus
};

Evaluated evaluate(const Fixture& f, const DetectionConfig& base, std::size_t jobs) {
  Evaluated e;
  const auto b = pipeline::first_run_cpdns(f.model, f.table, base, half(f.benign, 0), jobs);
  const auto a = pipeline::first_run_cpdns(f.model, f.table, base, mixed(f, 0), jobs);
  e.report = calibrate(b, a, base);
  const auto& cfg = e.report.config;
  e.benign = pipeline::summarize(pipeline::detect_all(f.model, f.table, cfg, half(f.benign, 1), jobs));
  e.mixed = pipeline::summarize(pipeline::detect_all(f.model, f.table, cfg, mixed(f, 1), jobs));
  for (const auto& c : f.corpora)
    e.per_k.push_back(
        pipeline::summarize(pipeline::detect_all(f.model, f.table, cfg, adversarials(c, 1), jobs))
            .flagged_rate);
  return e;
}

Outcome cpdn_separation(const Fixture& f, std::size_t jobs) {
  const DetectionConfig cfg = adaptive_base();
  const auto b = pipeline::first_run_cpdns(f.model, f.table, cfg, f.benign, jobs);
  const auto a = pipeline::first_run_cpdns(f.model, f.table, cfg, adversarials(f.corpora[0], -1), jobs);
  const double mb = stats::median(b), ma = stats::median(a);
  const auto mw = stats::mann_whitney_u(a, b);
  const bool ok = f.test_accuracy >= kMinAccuracy && b.size() >= 100 && a.size() >= 100 &&
                  ma > mb && mw.p_greater < kMannWhitneyAlpha;
  return {ok, fmt("acc %.3f, %zu benign / %zu adv, median CPDN %.4f vs %.4f, p = %.2e",
                  f.test_accuracy, b.size(), a.size(), mb, ma, mw.p_greater)};
}

Outcome single_run(const Evaluated& adaptive) {
  const double s = adaptive.benign.single_run_fraction;
  return {s >= kSingleRunMin, fmt("%.3f of %zu held-out benign inputs finish after one run", s,
                                  adaptive.benign.count)};
}

Outcome ordering(const Evaluated& adaptive, const Evaluated& low, const Evaluated& high) {
  const bool a = adaptive.mixed.flagged_rate > low.mixed.flagged_rate;
  const bool b = adaptive.benign.flagged_rate < high.benign.flagged_rate;
  return {a && b, fmt("(a) TPR adaptive %.3f vs fixed-0.2 %.3f %s; (b) FPR adaptive %.3f vs "
                      "fixed-0.8 %.3f %s",
                      adaptive.mixed.flagged_rate, low.mixed.flagged_rate, a ? "ok" : "FAIL",
                      adaptive.benign.flagged_rate, high.benign.flagged_rate, b ? "ok" : "FAIL")};
}

Outcome confidence_monotonicity(const Fixture& f, const Evaluated& adaptive, const Evaluated& low) {
  std::vector<double> z;
  for (const auto& c : f.corpora) {
    double s = 0.0;
    for (const auto& e : c) s += e.result.confidence;
    z.push_back(c.empty() ? 0.0 : s / static_cast<double>(c.size()));
  }
  const bool nondecreasing = z[0] <= z[1] && z[1] <= z[2];
  const double da = std::abs(adaptive.per_k[0] - adaptive.per_k[2]);
  const double dl = low.per_k[0] - low.per_k[2];
  const bool ok = nondecreasing && da <= kRobustnessBand && dl > kRobustnessBand;
  return {ok, fmt("z_gap %.3f/%.3f/%.3f; adaptive k0 %.3f k5 %.3f; fixed-0.2 k0 %.3f k5 %.3f", z[0],
                  z[1], z[2], adaptive.per_k[0], adaptive.per_k[2], low.per_k[0], low.per_k[2])};
}

Outcome beta_tradeoff(const Fixture& f, std::size_t jobs) {
  constexpr double betas[] = {1e-4, 1e-3, 1e-2, 1e-1};
  constexpr std::size_t inputs = 24;
  CounterRng rng(kSeed, StreamDomain::Attack, 8);
  struct Pair {
    std::size_t source, exemplar;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; pairs.size() < inputs; ++i) {
    const std::size_t src = rng.below(f.benign.size());
    const std::size_t target = (f.benign_labels[src] + 1) % f.model.num_classes;
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < f.benign.size(); ++j)
      if (f.benign_labels[j] == target) candidates.push_back(j);
    pairs.push_back({src, candidates[rng.below(candidates.size())]});
  }
  std::vector<double> l2(std::size(betas) * inputs), l1(l2.size());
  std::vector<int> success(l2.size());
  pipeline::parallel_for(l2.size(), jobs, [&](std::size_t n) {
    AttackConfig ac;
    ac.kind = AttackKind::Adaptive;
    ac.beta = betas[n / inputs];
    ac.iters = 2000;
    ac.lr = 0.02;
    ac.seed = kSeed;
    const Pair p = pairs[n % inputs];
    const AttackResult r = adaptive_attack(f.model, f.benign[p.source], f.benign[p.exemplar], ac);
    l2[n] = r.distortion.l2;
    l1[n] = r.l1_to_target_probs.value_or(2.0);
    success[n] = r.success;
  });
  std::vector<double> b, ml2, ml1;
  std::string detail;
  for (std::size_t k = 0; k < std::size(betas); ++k) {
    const std::span<const double> s2(l2.data() + k * inputs, inputs), s1(l1.data() + k * inputs, inputs);
    b.push_back(betas[k]);
    ml2.push_back(stats::mean(s2));
    ml1.push_back(stats::mean(s1));
    detail += fmt("b=%g L2 %.4f L1 %.4f; ", betas[k], ml2.back(), ml1.back());
  }
  const double r2 = stats::spearman(b, ml2), r1 = stats::spearman(b, ml1);
  detail += fmt("rho(L2) %.2f rho(L1) %.2f over %zu inputs", r2, r1, inputs);
  return {r2 >= kSpearmanMin && r1 <= -kSpearmanMin, detail};
}

accel::FilterJob job(int id, std::vector<std::uint8_t> mask) {
  return accel::FilterJob::from_mask(id, std::move(mask));
}

Outcome simulator_equivalence() {
  CounterRng rng(kSeed, StreamDomain::Workload, 9);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    accel::AccelConfig cfg;
    cfg.tiles = 1 + rng.below(4);
    cfg.filters_per_tile = 1 + rng.below(6);
    cfg.lanes_per_filter = 1 + rng.below(3);
    cfg.lookahead = 1 + rng.below(4);
    const std::size_t positions = 1 + rng.below(40);
    const std::size_t outputs = 1 + rng.below(10);
    const double density = rng.uniform();
    std::vector<accel::FilterJob> jobs;
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t f = 0; f < n; ++f) {
      std::vector<std::uint8_t> mask(positions);
      for (auto& bit : mask) bit = rng.uniform() < density;
      jobs.push_back(job(static_cast<int>(f * 7 % 13), std::move(mask)));
    }
    const auto groups = accel::schedule_groups(jobs, cfg.filters_per_tile);
    const auto got = accel::simulate_sparse(groups, cfg, outputs);
    const auto want = oracle::reference_sparse_layer(jobs, cfg, outputs);
    if (got.total_cycles != want.cycles || got.mac_ops != want.macs || got.group_cycles != want.group_cycles)
      ++mismatches;
  }
  accel::AccelConfig micro;
  micro.filters_per_tile = 4;
  micro.lanes_per_filter = 1;
  micro.lookahead = 2;
  const accel::ScheduleGroup g{{job(0, {0, 1, 1, 0}), job(1, {0, 1, 0, 1}), job(2, {1, 0, 1, 0}),
                                job(3, {1, 0, 0, 1})}};
  const auto dense = accel::time_group_dense(g, micro);
  const auto sparse = accel::time_group_sparse(g, micro);
  const double first = sparse.cycle_macs.empty()
                           ? 0.0
                           : sparse.cycle_macs[0] / static_cast<double>(micro.filters_per_tile *
                                                                        micro.lanes_per_filter);
  const bool ok = mismatches == 0 && dense.cycles == 4 && sparse.cycles == 2 && first == 1.0;
  return {ok, fmt("%zu/1000 instances differ; micro-workload dense %llu sparse %llu, cycle-1 "
                  "utilization %.2f",
                  mismatches, static_cast<unsigned long long>(dense.cycles),
                  static_cast<unsigned long long>(sparse.cycles), first)};
}

Outcome overhead(const Fixture& f, std::size_t jobs) {
  struct Row {
    double cap, sparsity, overhead, runs;
  };
  std::vector<Row> rows;
  std::vector<Tensor> eval = half(f.benign, 1);
  const auto adv = mixed(f, 1);
  eval.insert(eval.end(), adv.begin(), adv.end());
  const accel::AccelConfig accel_cfg;
  for (double cap : {0.2, 0.5, 0.8}) {
    const DetectionConfig base = fixed_base(cap);
    const auto b = pipeline::first_run_cpdns(f.model, f.table, base, half(f.benign, 0), jobs);
    const auto a = pipeline::first_run_cpdns(f.model, f.table, base, mixed(f, 0), jobs);
    const auto report = calibrate(b, a, base);
    const auto episodes = pipeline::detect_all(f.model, f.table, report.config, eval, jobs, true);
    double dropped = 0.0, total = 0.0;
    for (const auto& e : episodes) {
      for (const auto& plan : e.plans) {
        dropped += static_cast<double>(plan.total_weights() - plan.active_weights());
        total += static_cast<double>(plan.total_weights());
      }
    }
    const auto work = pipeline::episode_workloads(f.model, episodes);
    rows.push_back({cap, dropped / total, accel::detection_overhead(work, accel_cfg),
                    pipeline::summarize(episodes).mean_runs});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.sparsity < y.sparsity; });
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ok = ok && rows[i].overhead >= kOverheadLo && rows[i].overhead <= kOverheadHi;
    if (i > 0) ok = ok && rows[i].overhead < rows[i - 1].overhead;
    detail += fmt("cap %.1f sparsity %.3f runs %.2f overhead %.3fx; ", rows[i].cap, rows[i].sparsity,
                  rows[i].runs, rows[i].overhead);
  }
  return {ok, detail};
}

std::uint64_t fnv1a(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 1099511628211ull;
  }
  return h;
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

// Runs every CLI stage into `dir`; returns the primary outputs.
std::vector<std::string> cli_pipeline(const std::string& cli, const fs::path& dir, std::size_t jobs,
                                      std::string& error) {
  fs::create_directories(dir);
  const std::string d = dir.string() + "/";
  const std::string j = " --jobs " + std::to_string(jobs) + " --seed 7";
  const std::vector<std::pair<std::string, std::vector<std::string>>> stages = {
      {"make-dataset --count 200 --out " + d + "train.dset", {"train.dset"}},
      {"make-dataset --count 80 --dataset-seed 5 --out " + d + "test.dset", {"test.dset"}},
      {"train-fixture --dataset " + d + "train.dset --epochs 15 --out " + d + "model.json",
       {"model.json"}},
      {"profile --model " + d + "model.json --out " + d + "table.thrt", {"table.thrt"}},
      {"attack --model " + d + "model.json --dataset " + d + "test.dset --iters 60 --out " + d +
           "adv.dset",
       {"adv.dset", "adv.dset.csv"}},
      {"calibrate --model " + d + "model.json --dataset " + d + "test.dset --adversarial " + d +
           "adv.dset --out " + d + "calib.json",
       {"calib.json"}},
      {"detect --model " + d + "model.json --dataset " + d + "adv.dset --config " + d +
           "calib.json --dump-masks " + d + "masks.csv --out " + d + "verdicts.csv",
       {"verdicts.csv", "masks.csv"}},
      {"evaluate --model " + d + "model.json --dataset " + d + "test.dset --adversarial " + d +
           "adv.dset --config " + d + "calib.json --compare-fixed --simulate --out " + d + "summary.json",
       {"summary.json"}},
      {"simulate --masks " + d + "masks.csv --out " + d + "sim.json", {"sim.json"}},
  };
  std::vector<std::string> outputs;
  for (const auto& [args, outs] : stages) {
    if (run(cli + " " + args + j) != 0) {
      error = "stage failed: " + args.substr(0, args.find(' '));
      return {};
    }
    for (const auto& o : outs) outputs.push_back(o);
  }
  return outputs;
}

Outcome cli_determinism(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not found (pass --cli)"};
  const fs::path root = fs::temp_directory_path() /
                        ("dnnshield_accept_" + std::to_string(std::chrono::steady_clock::now()
                                                                  .time_since_epoch()
                                                                  .count()));
  std::string error;
  const auto outs = cli_pipeline(cli, root / "a", 1, error);
  if (outs.empty()) return {false, error};
  cli_pipeline(cli, root / "b", 4, error);
  if (!error.empty()) return {false, error + " (second run)"};
  std::size_t differ = 0, compared = 0;
  std::string which;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".manifest.json")) continue;  // carries wall-clock time
    ++compared;
    const fs::path other = root / "b" / name;
    if (!fs::exists(other) || fnv1a(entry.path()) != fnv1a(other)) {
      ++differ;
      which += " " + name;
    }
  }
  fs::remove_all(root);
  return {differ == 0 && compared >= outs.size(),
          fmt("%zu primary outputs of %zu stages compared across two runs (--jobs 1 vs 4), %zu differ%s",
              compared, outs.size(), differ, which.c_str())};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only, xfail, cli;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--xfail", xfail, "criteria that are expected to fail");
  app.add_option("--cli", cli, "path to the dnnshield tool");
  app.add_option("--jobs", jobs);
  CLI11_PARSE(app, argc, argv);
  const auto selected = parse_list(only);
  const auto expected_fail = parse_list(xfail);
  auto wanted = [&](int c) { return selected.empty() || selected.count(c); };

  std::unique_ptr<Fixture> fx;
  auto fixture_ = [&]() -> const Fixture& {
    if (!fx) fx = std::make_unique<Fixture>(build_fixture(jobs));
    return *fx;
  };
  std::map<std::string, Evaluated> evals;
  auto evaluated = [&](const std::string& name) -> const Evaluated& {
    auto it = evals.find(name);
    if (it != evals.end()) return it->second;
    const DetectionConfig base = name == "adaptive" ? adaptive_base()
                                 : name == "fixed-0.2" ? fixed_base(0.2)
                                                       : fixed_base(0.8);
    return evals.emplace(name, evaluate(fixture_(), base, jobs)).first->second;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"masked forward equals zeroed clone", masked_forward_equivalence},
      {"input gradients match finite differences", gradient_check},
      {"certified radius anchors", radius_anchors},
      {"CPDN separates benign from CW k=0", [&] { return cpdn_separation(fixture_(), jobs); }},
      {"adaptive cap beats both fixed caps",
       [&] { return ordering(evaluated("adaptive"), evaluated("fixed-0.2"), evaluated("fixed-0.8")); }},
      {"single noisy run suffices for benign inputs", [&] { return single_run(evaluated("adaptive")); }},
      {"detection is robust to attack confidence",
       [&] { return confidence_monotonicity(fixture_(), evaluated("adaptive"), evaluated("fixed-0.2")); }},
      {"beta trades distortion for mimicry", [&] { return beta_tradeoff(fixture_(), jobs); }},
      {"sparse simulator matches reference", simulator_equivalence},
      {"detection overhead", [&] { return overhead(fixture_(), jobs); }},
      {"CLI stages are deterministic", [&] { return cli_determinism(cli); }},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!wanted(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool xf = expected_fail.count(id) > 0;
    const char* tag = o.pass ? (xf ? "XPASS" : "PASS") : (xf ? "XFAIL" : "FAIL");
    unexpected += o.pass == xf;
    std::printf("[%-5s] %2d %-45s %s (%.1fs)\n", tag, id, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
