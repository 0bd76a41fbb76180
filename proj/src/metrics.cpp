#include "llmrerank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "llmrerank/error.hpp"

namespace llmrerank {

namespace {

std::size_t hits_in_prefix(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  const auto limit = std::min(n, ranking.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < limit; ++i) hits += relevant.count(ranking[i]);
  return hits;
}

}  // namespace

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::HitRatio: return "HitRatio";
    case Metric::Recall: return "Recall";
    case Metric::Precision: return "Precision";
    case Metric::Ndcg: return "NDCG";
  }
  return "NDCG";
}

std::string metric_label(Metric metric, std::size_t n) {
  const char* name = metric == Metric::HitRatio ? "Hit Ratio" : to_string(metric).data();
  return std::string(name) + "@" + std::to_string(n);
}

double hit_ratio_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  require(n >= 1, "cutoff must be >= 1");
  return hits_in_prefix(ranking, relevant, n) > 0 ? 1.0 : 0.0;
}

double recall_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  require(n >= 1, "cutoff must be >= 1");
  if (relevant.empty()) return 0.0;
  return static_cast<double>(hits_in_prefix(ranking, relevant, n)) / static_cast<double>(relevant.size());
}

double precision_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  require(n >= 1, "cutoff must be >= 1");
  return static_cast<double>(hits_in_prefix(ranking, relevant, n)) / static_cast<double>(n);
}

double ndcg_at(std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  require(n >= 1, "cutoff must be >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  const auto limit = std::min(n, ranking.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (relevant.count(ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const auto ideal = std::min(n, relevant.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double metric_at(Metric metric, std::span<const ItemId> ranking, const std::set<ItemId>& relevant, std::size_t n) {
  switch (metric) {
    case Metric::HitRatio: return hit_ratio_at(ranking, relevant, n);
    case Metric::Recall: return recall_at(ranking, relevant, n);
    case Metric::Precision: return precision_at(ranking, relevant, n);
    case Metric::Ndcg: return ndcg_at(ranking, relevant, n);
  }
  return 0.0;
}

std::vector<MetricResult> evaluate_run(const RankingsByUser& rankings,
                                       const std::map<UserId, RelevanceSet>& relevance,
                                       const std::vector<std::size_t>& cutoffs) {
  for (const auto& [user, ranking] : rankings) {
    if (!relevance.count(user)) fail(ErrorCode::MissingRelevance, "no relevance set for user " + user.str());
  }
  auto sorted_cutoffs = cutoffs;
  std::sort(sorted_cutoffs.begin(), sorted_cutoffs.end());
  sorted_cutoffs.erase(std::unique(sorted_cutoffs.begin(), sorted_cutoffs.end()), sorted_cutoffs.end());

  std::vector<MetricResult> out;
  for (const auto n : sorted_cutoffs) {
    for (const auto metric : kAllMetrics) {
      MetricResult r{metric, n, {}, 0.0};
      double sum = 0.0;
      for (const auto& [user, ranking] : rankings) {
        const double v = metric_at(metric, ranking, relevance.at(user).relevant, n);
        r.per_user.emplace(user, v);
        sum += v;
      }
      r.mean = r.per_user.empty() ? 0.0 : sum / static_cast<double>(r.per_user.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string metrics_to_csv(const std::vector<MetricResult>& results) {
  std::string out = "metric,n,users,mean\n";
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.6f", r.mean);
    out += std::string(to_string(r.metric)) + "," + std::to_string(r.n) + "," + std::to_string(r.per_user.size()) +
           "," + buf + "\n";
  }
  return out;
}

std::string metrics_to_json(const std::vector<MetricResult>& results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json per_user;
    for (const auto& [user, v] : r.per_user) per_user[user.str()] = v;
    j.push_back({{"metric", to_string(r.metric)}, {"n", r.n}, {"mean", r.mean}, {"per_user", per_user}});
  }
  return j.dump(2);
}

}  // namespace llmrerank
