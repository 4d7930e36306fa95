#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace singular_drift {

/// Exact W1 distance between two empirical laws on the line. Equal sizes reduce
/// to the mean absolute difference of the sorted samples.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_stat(std::span<const double> a, std::span<const double> b);

/// |mean_a - mean_b| + |sd_a - sd_b|.
double moment_distance(std::span<const double> a, std::span<const double> b);

struct KendallResult {
  double tau = 0.0;
  /// One-sided p-value for a decreasing trend, P(tau' <= tau) under independence.
  double p_decreasing = 1.0;
  bool exact = true;
};

/// Kendall tau of `y` against its index. Exact permutation p-value for up to 10
/// points, normal approximation beyond.
KendallResult kendall_trend(std::span<const double> y);

struct Interval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

using TwoSampleStatistic = std::function<double(std::span<const double>, std::span<const double>)>;

/// Percentile bootstrap over paired indices (common random numbers keep the
/// pairing), `resamples` draws keyed by `seed`.
Interval paired_bootstrap(std::span<const double> a, std::span<const double> b, const TwoSampleStatistic& stat,
                          int resamples, std::uint64_t seed, double level = 0.95);

/// Statistic between the first and second half of one ensemble: the Monte
/// Carlo resolution of a law comparison at this sample size.
double split_floor(std::span<const double> a, const TwoSampleStatistic& stat);

double mean(std::span<const double> a);
/// Unbiased sample variance.
double variance(std::span<const double> a);
double covariance(std::span<const double> a, std::span<const double> b);

}  // namespace singular_drift
