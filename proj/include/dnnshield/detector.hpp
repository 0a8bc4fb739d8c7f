#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dnnshield/engine.hpp"
#include "dnnshield/model.hpp"
#include "dnnshield/plan.hpp"
#include "dnnshield/sparsifier.hpp"

namespace dnnshield {

struct ConfidenceReading {
  double z_top = 0.0;
  double z_runner_up = 0.0;
  double z_gap = 0.0;
  std::size_t predicted_class = 0;
};

/// Standardises the logits with the population standard deviation and reports the
/// gap between the top two z-scores. Zero variance gives all-zero scores.
ConfidenceReading z_score_confidence(std::span<const float> logits);

/// L1 distance between a reference and a noisy probability vector, in [0, 2].
double cpdn(std::span<const float> p_ref, std::span<const float> p_noisy);

/// Gaussian-smoothing robustness radius (sigma/2) * (Phi^-1(p1) - Phi^-1(p2)).
double certified_radius(double p1, double p2, double sigma);

struct DetectionConfig {
  double t1 = 0.0;   // slow benign threshold on the running mean
  double t2 = 2.0;   // slow adversarial threshold on the running mean
  double t1p = 0.0;  // first-run benign fast path
  double t2p = 2.0;  // first-run adversarial fast path
  std::size_t max_runs = 4;
  SparsifierParams sparsifier;
  std::uint64_t seed = 1;

  /// Requires 0 <= t1p <= t1 <= t2 <= t2p <= 2 and max_runs >= 1.
  void validate() const;
};

enum class Verdict { Benign, Adversarial };
enum class Termination { FastPathLow, FastPathHigh, MeanLow, MeanHigh, DefaultBenign };

std::string_view to_string(Verdict v);
std::string_view to_string(Termination t);

struct DetectionVerdict {
  Verdict label = Verdict::Benign;
  std::size_t runs_used = 0;
  std::vector<double> l1_trace;
  double mean_l1 = 0.0;
  Termination terminated_by = Termination::DefaultBenign;
  ConfidenceReading reading;
  double sr_cap = 0.0;
};

/// Source of the dense reference and of noisy passes for one input.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual Inference dense() = 0;
  /// Probabilities of noisy pass `run` (0-based) under the given sparsification cap.
  virtual std::vector<float> noisy(std::size_t run, double sr_cap) = 0;
};

/// Noisy passes by dynamic random sparsification of a model. Every pass draws a fresh
/// rate vector from the stream (seed, input id, run index).
class ModelBackend final : public InferenceBackend {
 public:
  ModelBackend(const Model& model, const Tensor& input, const ThresholdTable& table,
               std::uint64_t seed, std::uint32_t input_id);

  Inference dense() override;
  std::vector<float> noisy(std::size_t run, double sr_cap) override;

  /// Plans of the noisy passes issued so far, in run order (when recording).
  void record_plans(bool on) { record_ = on; }
  const std::vector<SparsityPlan>& plans() const noexcept { return plans_; }

  std::size_t dense_calls() const noexcept { return dense_calls_; }
  std::size_t noisy_calls() const noexcept { return noisy_calls_; }

 private:
  const Model& model_;
  const Tensor& input_;
  const ThresholdTable& table_;
  std::uint64_t seed_;
  std::uint32_t input_id_;
  bool record_ = false;
  std::vector<SparsityPlan> plans_;
  std::size_t dense_calls_ = 0;
  std::size_t noisy_calls_ = 0;
};

/// The multi-pass decision procedure:
///   dense pass -> confidence -> SR cap;
///   noisy pass 1: CPDN < t1p => Benign, CPDN > t2p => Adversarial;
///   further passes while runs < M: mean CPDN over all noisy passes < t1 => Benign,
///   > t2 => Adversarial;
///   after M passes => Benign.
DetectionVerdict run_detection(InferenceBackend& backend, const DetectionConfig& config);

DetectionVerdict detect(const Model& model, const Tensor& input, const ThresholdTable& table,
                        const DetectionConfig& config, std::uint32_t input_id = 0,
                        std::vector<SparsityPlan>* plans = nullptr);

/// CPDN of the first noisy pass only (the calibration statistic).
double first_run_cpdn(const Model& model, const Tensor& input, const ThresholdTable& table,
                      const DetectionConfig& config, std::uint32_t input_id = 0);

struct Percentiles {
  std::size_t count = 0;
  double p05 = 0, p20 = 0, p50 = 0, p80 = 0, p95 = 0;
};

Percentiles percentiles(std::span<const double> samples);

struct CalibrationReport {
  DetectionConfig config;
  double fast_coverage = 0.80;
  double slow_coverage = 0.95;
  Percentiles benign;
  Percentiles adversarial;
  bool overlap = false;
  std::optional<double> tpr;  // filled by a held-out evaluation
  std::optional<double> fpr;
};

/// Fits the four thresholds from first-run CPDN samples by nearest-rank quantiles:
/// t1p/t1 from the benign fast/slow coverage quantiles, t2p/t2 from the adversarial
/// (1-fast)/(1-slow) quantiles. When t1 > t2 the slow pair collapses to the midpoint of
/// the fast pair (and the fast pair too if it is inverted), and `overlap` is set.
CalibrationReport calibrate(std::span<const double> benign, std::span<const double> adversarial,
                            const DetectionConfig& base, double fast_coverage = 0.80,
                            double slow_coverage = 0.95);

}  // namespace dnnshield
