#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmrerank/ingest.hpp"

namespace llmrerank {

enum class Metric { HitRatio, Recall, Precision, Ndcg };

inline constexpr Metric kAllMetrics[] = {Metric::HitRatio, Metric::Recall, Metric::Precision, Metric::Ndcg};

/// "HitRatio", "Recall", "Precision", "NDCG".
std::string_view to_string(Metric metric) noexcept;
/// Table label, e.g. "Hit Ratio@3".
std::string metric_label(Metric metric, std::size_t n);

/// 1 if any of the first n items is relevant.
double hit_ratio_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n);
/// |top-n & relevant| / |relevant|; 0 when relevant is empty.
double recall_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n);
/// |top-n & relevant| / n, even when the ranking is shorter than n.
double precision_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n);
/// Binary-relevance DCG@n over IDCG@n with the ideal capped at min(n, |relevant|).
double ndcg_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n);

double metric_at(Metric metric, std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n);

struct MetricResult {
  Metric metric = Metric::Ndcg;
  std::size_t n = 0;
  std::map<UserId, double> per_user;
  double mean = 0.0;
};

using RankingsByUser = std::map<UserId, std::vector<ItemId>>;

/// Every metric at every cutoff, grouped by cutoff (cutoffs ascending).
/// Throws MissingRelevance when a ranked user has no relevance set.
std::vector<MetricResult> evaluate_run(const RankingsByUser& rankings,
                                       const std::map<UserId, RelevanceSet>& relevance,
                                       const std::vector<std::size_t>& cutoffs);

std::string metrics_to_csv(const std::vector<MetricResult>& results);
std::string metrics_to_json(const std::vector<MetricResult>& results);

}  // namespace llmrerank
