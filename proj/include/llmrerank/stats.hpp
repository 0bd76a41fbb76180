#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llmrerank/metrics.hpp"

namespace llmrerank {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Student's t CDF with `df` degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

/// Two-sided p-value for a t statistic.
double two_sided_p(double t, double df);

/// "***" for p <= 0.001, "**" for <= 0.01, "*" for <= 0.05, else "".
std::string significance_stars(double p);

struct TTestResult {
  double t_value = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  std::string stars;
};

/// Differences d = a - b; t = mean(d) / (sd(d) / sqrt(n)), df = n - 1.
/// Throws LengthMismatch, ZeroVariance, or InvalidArgument for n < 2.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Welch by default; pooled-variance Student when equal_variance is set.
/// Throws ZeroVariance when the standard error is zero.
TTestResult two_sample_t_test(std::span<const double> a, std::span<const double> b, bool equal_variance = false);

struct ComparisonRow {
  Metric metric = Metric::Ndcg;
  std::size_t n = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  /// Empty when all paired differences are equal (rendered "-").
  std::optional<TTestResult> test;
};

/// Paired test of model A against model B per (metric, cutoff), pairing by
/// user. Cells present in only one run are skipped. Throws UserSetMismatch, or InvalidArgument for fewer than 2 users.
std::vector<ComparisonRow> compare_models(const std::vector<MetricResult>& a, const std::vector<MetricResult>& b);

/// p formatted to three decimals with stars, or "-".
std::string format_p(const std::optional<TTestResult>& test);

}  // namespace llmrerank
