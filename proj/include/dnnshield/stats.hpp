#pragma once

#include <span>
#include <vector>

namespace dnnshield::stats {

/// Nearest-rank quantile: the sorted sample at index floor(q * n), clamped to n-1.
/// With strict "< value" comparisons this leaves a q fraction of the sample below it.
double quantile(std::span<const double> samples, double q);

double median(std::span<const double> samples);
double mean(std::span<const double> samples);

double normal_cdf(double x);

/// Inverse standard-normal CDF by Acklam's rational approximation (relative error
/// below 1.15e-9 over (0,1)), refined with one Halley step against erfc.
double inverse_normal_cdf(double p);

struct MannWhitney {
  double u = 0.0;        // U statistic of the first sample
  double z = 0.0;        // normal approximation with tie correction
  double p_greater = 1;  // one-sided p-value for "first sample is stochastically greater"
};

MannWhitney mann_whitney_u(std::span<const double> first, std::span<const double> second);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> ranks(std::span<const double> values);

double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace dnnshield::stats
