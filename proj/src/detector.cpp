#include "dnnshield/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnnshield/error.hpp"
#include "dnnshield/rng.hpp"
#include "dnnshield/stats.hpp"

namespace dnnshield {

ConfidenceReading z_score_confidence(std::span<const float> logits) {
  require(logits.size() >= 2, ErrorKind::TooFewClasses, "need at least two logits");
  const double n = static_cast<double>(logits.size());
  double mean = 0.0;
  for (float z : logits) mean += z;
  mean /= n;
  double var = 0.0;
  for (float z : logits) var += (z - mean) * (z - mean);
  const double sd = std::sqrt(var / n);

  std::size_t top = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[top]) top = i;
  std::size_t second = top == 0 ? 1 : 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (i != top && logits[i] > logits[second]) second = i;

  ConfidenceReading reading;
  reading.predicted_class = top;
  if (sd > 0.0) {
    reading.z_top = (logits[top] - mean) / sd;
    reading.z_runner_up = (logits[second] - mean) / sd;
    reading.z_gap = std::max(0.0, reading.z_top - reading.z_runner_up);
  }
  return reading;
}

double cpdn(std::span<const float> p_ref, std::span<const float> p_noisy) {
  require(p_ref.size() == p_noisy.size(), ErrorKind::ShapeMismatch,
          "probability vectors differ in length");
  double s_ref = 0.0, s_noisy = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < p_ref.size(); ++i) {
    s_ref += p_ref[i];
    s_noisy += p_noisy[i];
    l1 += std::abs(static_cast<double>(p_ref[i]) - p_noisy[i]);
  }
  require(std::abs(s_ref - 1.0) <= 1e-6 && std::abs(s_noisy - 1.0) <= 1e-6,
          ErrorKind::DomainError, "probability vectors must sum to 1");
  return l1;
}

double certified_radius(double p1, double p2, double sigma) {
  require(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0, ErrorKind::DomainError,
          "probabilities must lie in (0,1)");
  require(sigma >= 0.0, ErrorKind::DomainError, "sigma must be >= 0");
  if (sigma == 0.0 || p1 == p2) return 0.0;
  return 0.5 * sigma * (stats::inverse_normal_cdf(p1) - stats::inverse_normal_cdf(p2));
}

void DetectionConfig::validate() const {
  require(0.0 <= t1p && t1p <= t1 && t1 <= t2 && t2 <= t2p && t2p <= 2.0,
          ErrorKind::InvalidArgument,
          "thresholds must satisfy 0 <= t1p <= t1 <= t2 <= t2p <= 2");
  require(max_runs >= 1, ErrorKind::InvalidArgument, "max_runs must be >= 1");
  sparsifier.validate();
}

std::string_view to_string(Verdict v) { return v == Verdict::Benign ? "Benign" : "Adversarial"; }

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::FastPathLow: return "FastPathLow";
    case Termination::FastPathHigh: return "FastPathHigh";
    case Termination::MeanLow: return "MeanLow";
    case Termination::MeanHigh: return "MeanHigh";
    case Termination::DefaultBenign: return "DefaultBenign";
  }
  return "Unknown";
}

ModelBackend::ModelBackend(const Model& model, const Tensor& input, const ThresholdTable& table,
                           std::uint64_t seed, std::uint32_t input_id)
    : model_(model), input_(input), table_(table), seed_(seed), input_id_(input_id) {}

Inference ModelBackend::dense() {
  ++dense_calls_;
  return forward(model_, input_);
}

std::vector<float> ModelBackend::noisy(std::size_t run, double sr_cap) {
  ++noisy_calls_;
  CounterRng rng(seed_, StreamDomain::SparsityRates, input_id_, static_cast<std::uint32_t>(run));
  const RateVector rates = sample_rates(sr_cap, table_.filters.size(), rng);
  SparsityPlan plan = build_plan(model_, rates, table_);
  auto probs = forward_masked(model_, input_, plan).probs;
  if (record_) plans_.push_back(std::move(plan));
  return probs;
}

DetectionVerdict run_detection(InferenceBackend& backend, const DetectionConfig& config) {
  config.validate();
  DetectionVerdict verdict;
  const Inference reference = backend.dense();
  verdict.reading = z_score_confidence(reference.logits);
  verdict.sr_cap = sr_cap_for(verdict.reading.z_gap, config.sparsifier);

  auto pass = [&] {
    const auto probs = backend.noisy(verdict.runs_used, verdict.sr_cap);
    verdict.l1_trace.push_back(cpdn(reference.probs, probs));
    ++verdict.runs_used;
    verdict.mean_l1 = stats::mean(verdict.l1_trace);
  };
  auto finish = [&](Verdict label, Termination why) {
    verdict.label = label;
    verdict.terminated_by = why;
    return verdict;
  };

  pass();
  const double first = verdict.l1_trace.front();
  if (first < config.t1p) return finish(Verdict::Benign, Termination::FastPathLow);
  if (first > config.t2p) return finish(Verdict::Adversarial, Termination::FastPathHigh);
  while (verdict.runs_used < config.max_runs) {
    pass();
    if (verdict.mean_l1 < config.t1) return finish(Verdict::Benign, Termination::MeanLow);
    if (verdict.mean_l1 > config.t2) return finish(Verdict::Adversarial, Termination::MeanHigh);
  }
  return finish(Verdict::Benign, Termination::DefaultBenign);
}

DetectionVerdict detect(const Model& model, const Tensor& input, const ThresholdTable& table,
                        const DetectionConfig& config, std::uint32_t input_id,
                        std::vector<SparsityPlan>* plans) {
  table.check_against(model);
  ModelBackend backend(model, input, table, config.seed, input_id);
  backend.record_plans(plans != nullptr);
  DetectionVerdict verdict = run_detection(backend, config);
  if (plans) *plans = backend.plans();
  return verdict;
}

double first_run_cpdn(const Model& model, const Tensor& input, const ThresholdTable& table,
                      const DetectionConfig& config, std::uint32_t input_id) {
  table.check_against(model);
  ModelBackend backend(model, input, table, config.seed, input_id);
  const Inference reference = backend.dense();
  const double cap = sr_cap_for(z_score_confidence(reference.logits).z_gap, config.sparsifier);
  return cpdn(reference.probs, backend.noisy(0, cap));
}

Percentiles percentiles(std::span<const double> samples) {
  Percentiles p;
  p.count = samples.size();
  if (samples.empty()) return p;
  p.p05 = stats::quantile(samples, 0.05);
  p.p20 = stats::quantile(samples, 0.20);
  p.p50 = stats::quantile(samples, 0.50);
  p.p80 = stats::quantile(samples, 0.80);
  p.p95 = stats::quantile(samples, 0.95);
  return p;
}

CalibrationReport calibrate(std::span<const double> benign, std::span<const double> adversarial,
                            const DetectionConfig& base, double fast_coverage,
                            double slow_coverage) {
  require(!benign.empty() && !adversarial.empty(), ErrorKind::EmptyCorpus,
          "calibration needs benign and adversarial samples");
  require(fast_coverage > 0.0 && fast_coverage < 1.0 && slow_coverage > 0.0 &&
              slow_coverage < 1.0 && fast_coverage <= slow_coverage,
          ErrorKind::InvalidArgument, "coverages must satisfy 0 < fast <= slow < 1");
  CalibrationReport report;
  report.fast_coverage = fast_coverage;
  report.slow_coverage = slow_coverage;
  report.benign = percentiles(benign);
  report.adversarial = percentiles(adversarial);

  DetectionConfig& cfg = report.config;
  cfg = base;
  cfg.t1p = stats::quantile(benign, fast_coverage);
  cfg.t1 = stats::quantile(benign, slow_coverage);
  cfg.t2p = stats::quantile(adversarial, 1.0 - fast_coverage);
  cfg.t2 = stats::quantile(adversarial, 1.0 - slow_coverage);
  if (cfg.t1 > cfg.t2) {
    report.overlap = true;
    if (cfg.t1p > cfg.t2p) cfg.t1p = cfg.t2p = 0.5 * (cfg.t1p + cfg.t2p);
    cfg.t1 = cfg.t2 = 0.5 * (cfg.t1p + cfg.t2p);
  }
  cfg.validate();
  return report;
}

}  // namespace dnnshield
