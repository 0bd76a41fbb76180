#include "llmrerank/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "llmrerank/error.hpp"

namespace llmrerank {

namespace {

constexpr int kMaxIterations = 300;
constexpr double kEpsilon = 1e-15;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b); valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) break;
  }
  return h;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n - 1
};

Moments moments(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

TTestResult make_result(double t, double df) {
  TTestResult r;
  r.t_value = t;
  r.degrees_of_freedom = df;
  r.p_value = two_sided_p(t, df);
  r.stars = significance_stars(r.p_value);
  return r;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  require(df > 0.0, "degrees of freedom must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

double two_sided_p(double t, double df) {
  require(df > 0.0, "degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

std::string significance_stars(double p) {
  if (p <= 0.001) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "";
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " observations");
  }
  require(a.size() >= 2, "paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto m = moments(d);
  if (!(m.variance > 0.0)) fail(ErrorCode::ZeroVariance, "all paired differences are equal");
  const double n = static_cast<double>(d.size());
  return make_result(m.mean / std::sqrt(m.variance / n), n - 1.0);
}

TTestResult two_sample_t_test(std::span<const double> a, std::span<const double> b, bool equal_variance) {
  require(a.size() >= 2 && b.size() >= 2, "two-sample t-test needs at least 2 observations per sample");
  const auto ma = moments(a);
  const auto mb = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  if (equal_variance) {
    const double df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * ma.variance + (nb - 1.0) * mb.variance) / df;
    const double se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    if (!(se > 0.0)) fail(ErrorCode::ZeroVariance, "both samples are constant");
    return make_result((ma.mean - mb.mean) / se, df);
  }
  const double va = ma.variance / na;
  const double vb = mb.variance / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) fail(ErrorCode::ZeroVariance, "both samples are constant");
  // Welch-Satterthwaite.
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return make_result((ma.mean - mb.mean) / std::sqrt(se2), df);
}

std::vector<ComparisonRow> compare_models(const std::vector<MetricResult>& a, const std::vector<MetricResult>& b) {
  std::vector<ComparisonRow> rows;
  for (const auto& ra : a) {
    const MetricResult* rb = nullptr;
    for (const auto& candidate : b) {
      if (candidate.metric == ra.metric && candidate.n == ra.n) rb = &candidate;
    }
    if (rb == nullptr) continue;
    if (ra.per_user.size() != rb->per_user.size()) {
      fail(ErrorCode::UserSetMismatch, "runs evaluate different users");
    }
    std::vector<double> xs, ys;
    for (const auto& [user, v] : ra.per_user) {
      const auto it = rb->per_user.find(user);
      if (it == rb->per_user.end()) fail(ErrorCode::UserSetMismatch, "user " + user.str() + " missing from run B");
      xs.push_back(v);
      ys.push_back(it->second);
    }
    require(xs.size() >= 2, "model comparison needs at least 2 users");
    ComparisonRow row{ra.metric, ra.n, ra.mean, rb->mean, std::nullopt};
    try {
      row.test = paired_t_test(xs, ys);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_p(const std::optional<TTestResult>& test) {
  if (!test) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", test->p_value);
  return std::string(buf) + test->stars;
}

}  // namespace llmrerank
