#include "dnnshield/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"
#include "dnnshield/stats.hpp"

namespace dnnshield::pipeline {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> first_run_cpdns(const Model& model, const ThresholdTable& table,
                                    const DetectionConfig& config,
                                    std::span<const Tensor> inputs, std::size_t jobs) {
  std::vector<double> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    out[i] = first_run_cpdn(model, inputs[i], table, config, static_cast<std::uint32_t>(i));
  });
  return out;
}

std::vector<Episode> detect_all(const Model& model, const ThresholdTable& table,
                                const DetectionConfig& config, std::span<const Tensor> inputs,
                                std::size_t jobs, bool record_plans) {
  std::vector<Episode> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    out[i].verdict = detect(model, inputs[i], table, config, static_cast<std::uint32_t>(i),
                            record_plans ? &out[i].plans : nullptr);
  });
  return out;
}

DetectionStats summarize(std::span<const Episode> episodes) {
  DetectionStats s;
  s.count = episodes.size();
  if (episodes.empty()) return s;
  std::vector<double> first;
  std::size_t flagged = 0, single = 0, runs = 0;
  for (const Episode& e : episodes) {
    flagged += e.verdict.label == Verdict::Adversarial;
    single += e.verdict.runs_used == 1;
    runs += e.verdict.runs_used;
    first.push_back(e.verdict.l1_trace.front());
  }
  const double n = static_cast<double>(episodes.size());
  s.flagged_rate = static_cast<double>(flagged) / n;
  s.single_run_fraction = static_cast<double>(single) / n;
  s.mean_runs = static_cast<double>(runs) / n;
  s.first_cpdn = percentiles(first);
  return s;
}

std::vector<accel::EpisodeWorkload> episode_workloads(const Model& model,
                                                      std::span<const Episode> episodes) {
  std::vector<accel::EpisodeWorkload> out;
  out.reserve(episodes.size());
  for (const Episode& e : episodes) {
    require(e.plans.size() == e.verdict.runs_used, ErrorKind::InvalidArgument,
            "episode plans were not recorded");
    accel::EpisodeWorkload w;
    for (const SparsityPlan& plan : e.plans) w.runs.push_back(accel::workloads_from_plan(model, plan));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<CorpusEntry> attack_corpus(const Model& model, const LabeledDataset& benign,
                                       const AttackConfig& config, std::size_t jobs,
                                       bool keep_failures) {
  std::vector<std::optional<CorpusEntry>> slots(benign.size());
  parallel_for(benign.size(), jobs, [&](std::size_t i) {
    const Tensor& x = benign.inputs[i];
    const auto logits = forward(model, x).logits;
    if (argmax(logits) != benign.labels[i]) return;
    AttackResult r;
    if (config.kind == AttackKind::Fgsm) {
      r = fgsm(model, x, benign.labels[i], config.epsilon);
    } else if (config.targeted) {
      r = cw_l2(model, x, select_target(logits, config.target), config);
    } else {
      r = cw_l2(model, x, benign.labels[i], config);
    }
    if (r.success || keep_failures) slots[i] = CorpusEntry{i, std::move(r)};
  });
  std::vector<CorpusEntry> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

}  // namespace dnnshield::pipeline
