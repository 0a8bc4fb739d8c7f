#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dnnshield/accel_sim.hpp"
#include "dnnshield/attack.hpp"
#include "dnnshield/detector.hpp"
#include "dnnshield/sparsifier.hpp"

namespace dnnshield::pipeline {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write results by index,
/// so output order never depends on completion order. Rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// First noisy-pass CPDN of every input; input i uses noise stream i.
std::vector<double> first_run_cpdns(const Model& model, const ThresholdTable& table,
                                    const DetectionConfig& config,
                                    std::span<const Tensor> inputs, std::size_t jobs = 1);

struct Episode {
  DetectionVerdict verdict;
  std::vector<SparsityPlan> plans;  // only when recorded
};

std::vector<Episode> detect_all(const Model& model, const ThresholdTable& table,
                                const DetectionConfig& config, std::span<const Tensor> inputs,
                                std::size_t jobs = 1, bool record_plans = false);

struct DetectionStats {
  std::size_t count = 0;
  double flagged_rate = 0.0;  // fraction labelled Adversarial
  double mean_runs = 0.0;
  double single_run_fraction = 0.0;
  Percentiles first_cpdn;
};

DetectionStats summarize(std::span<const Episode> episodes);

/// Noisy-pass workloads of every episode (plans must have been recorded).
std::vector<accel::EpisodeWorkload> episode_workloads(const Model& model,
                                                      std::span<const Episode> episodes);

struct CorpusEntry {
  std::size_t source_index = 0;  // index in the benign set
  AttackResult result;
};

/// CW-L2 (or FGSM for kind == Fgsm) on every correctly classified input; unsuccessful
/// attacks are dropped unless keep_failures is set.
std::vector<CorpusEntry> attack_corpus(const Model& model, const LabeledDataset& benign,
                                       const AttackConfig& config, std::size_t jobs = 1,
                                       bool keep_failures = false);

}  // namespace dnnshield::pipeline
