#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "llmrerank/error.hpp"
#include "llmrerank/metrics.hpp"
#include "llmrerank/random.hpp"
#include "support/synthetic.hpp"

using namespace llmrerank;
using testing::item_ids;

namespace {

std::set<ItemId> rel(std::initializer_list<const char*> ids) {
  std::set<ItemId> out;
  for (const auto* id : ids) out.insert(ItemId(id));
  return out;
}

std::vector<ItemId> ranking_of(std::size_t n) {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(std::to_string(i));
  return out;
}

}  // namespace

TEST_SUITE("metric examples") {
  TEST_CASE("hit ratio") {
    CHECK(hit_ratio_at(item_ids({"b", "a", "c"}), rel({"a"}), 3) == 1.0);
    CHECK(hit_ratio_at(item_ids({"b", "c", "a"}), rel({"a"}), 2) == 0.0);
    CHECK(hit_ratio_at(item_ids({"b", "c", "a"}), {}, 3) == 0.0);
  }

  TEST_CASE("recall") {
    CHECK(recall_at(item_ids({"a", "x", "b", "y", "z", "c"}), rel({"a", "b", "c", "d"}), 5) == 0.5);
    CHECK(recall_at(item_ids({"a", "b", "x"}), rel({"a", "b"}), 3) == 1.0);
    CHECK(recall_at(item_ids({"a", "b", "x"}), {}, 3) == 0.0);
  }

  TEST_CASE("precision") {
    CHECK(precision_at(item_ids({"a", "b", "c"}), rel({"a"}), 3) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(precision_at(item_ids({"a", "b", "c"}), rel({"a", "b"}), 2) == 1.0);
    CHECK(precision_at(item_ids({"a", "b"}), rel({"a", "b"}), 10) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("ndcg") {
    CHECK(ndcg_at(item_ids({"a", "x", "y"}), rel({"a"}), 1) == 1.0);
    CHECK(ndcg_at(item_ids({"a", "x", "y"}), rel({"a"}), 10) == 1.0);
    CHECK(std::abs(ndcg_at(item_ids({"x", "a", "y"}), rel({"a"}), 3) - 0.6309297535714575) < 1e-12);
    CHECK(std::abs(ndcg_at(item_ids({"p", "x", "q"}), rel({"p", "q"}), 3) - 0.9197207891481876) < 1e-12);
    CHECK(ndcg_at(item_ids({"p", "x", "q"}), {}, 3) == 0.0);
    CHECK(ndcg_at(item_ids({"x", "y"}), rel({"p"}), 3) == 0.0);
  }

  TEST_CASE("names and dispatch") {
    CHECK(to_string(Metric::HitRatio) == "HitRatio");
    CHECK(to_string(Metric::Ndcg) == "NDCG");
    CHECK(metric_label(Metric::HitRatio, 3) == "Hit Ratio@3");
    CHECK(metric_label(Metric::Ndcg, 10) == "NDCG@10");
    const auto r = item_ids({"x", "a", "y"});
    CHECK(metric_at(Metric::Ndcg, r, rel({"a"}), 3) == ndcg_at(r, rel({"a"}), 3));
    CHECK(metric_at(Metric::Precision, r, rel({"a"}), 2) == 0.5);
  }
}

TEST_SUITE("metric properties") {
  TEST_CASE("values in [0,1] and moving a hit earlier never hurts") {
    Rng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
      const auto len = 1 + rng.uniform_index(15);
      auto ranking = ranking_of(len);
      std::set<ItemId> relevant;
      for (std::size_t i = 0; i < 20; ++i) {
        if (rng.uniform01() < 0.3) relevant.insert(ItemId(std::to_string(i)));
      }
      const std::size_t n = 1 + rng.uniform_index(12);
      for (const auto m : kAllMetrics) {
        const auto v = metric_at(m, ranking, relevant, n);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      for (std::size_t i = 1; i < len; ++i) {
        if (relevant.count(ranking[i]) && !relevant.count(ranking[i - 1])) {
          auto moved = ranking;
          std::swap(moved[i], moved[i - 1]);
          for (const auto m : kAllMetrics) {
            CHECK(metric_at(m, moved, relevant, n) >= metric_at(m, ranking, relevant, n) - 1e-15);
          }
          break;
        }
      }
    }
  }

  TEST_CASE("ideal ordering scores exactly 1") {
    for (std::size_t k = 1; k <= 12; ++k) {
      const auto ranking = ranking_of(15);
      std::set<ItemId> relevant(ranking.begin(), ranking.begin() + k);
      for (const std::size_t n : {3, 5, 10}) CHECK(ndcg_at(ranking, relevant, n) == 1.0);
    }
  }

  TEST_CASE("recall equals precision when |relevant| = n") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      auto ranking = ranking_of(15);
      rng.shuffle(std::span(ranking));
      const std::size_t n = 1 + rng.uniform_index(10);
      std::set<ItemId> relevant;
      while (relevant.size() < n) relevant.insert(ItemId(std::to_string(rng.uniform_index(20))));
      CHECK(recall_at(ranking, relevant, n) == doctest::Approx(precision_at(ranking, relevant, n)).epsilon(1e-15));
    }
  }
}

TEST_SUITE("evaluate_run") {
  TEST_CASE("grouped by cutoff with per-user values and means") {
    RankingsByUser rankings{{UserId("u1"), item_ids({"a", "x", "b"})}, {UserId("u2"), item_ids({"x", "y", "c"})}};
    std::map<UserId, RelevanceSet> relevance{{UserId("u1"), {UserId("u1"), rel({"a", "b"})}},
                                             {UserId("u2"), {UserId("u2"), rel({"c"})}},
                                             {UserId("u3"), {UserId("u3"), rel({"z"})}}};
    const auto results = evaluate_run(rankings, relevance, {3, 1});
    REQUIRE(results.size() == 8);
    CHECK(results[0].n == 1);
    CHECK(results[0].metric == Metric::HitRatio);
    CHECK(results[3].metric == Metric::Ndcg);
    CHECK(results[4].n == 3);
    CHECK(results[4].per_user.size() == 2);
    CHECK(results[4].mean == 1.0);
    CHECK(results[0].per_user.at(UserId("u1")) == 1.0);
    CHECK(results[0].per_user.at(UserId("u2")) == 0.0);
    CHECK(results[0].mean == 0.5);
    const auto& precision3 = results[6];
    CHECK(precision3.metric == Metric::Precision);
    CHECK(precision3.mean == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("single user mean and missing relevance") {
    RankingsByUser rankings{{UserId("u"), item_ids({"x", "a"})}};
    std::map<UserId, RelevanceSet> relevance{{UserId("u"), {UserId("u"), rel({"a"})}}};
    for (const auto& r : evaluate_run(rankings, relevance, {2})) CHECK(r.mean == r.per_user.at(UserId("u")));
    rankings[UserId("ghost")] = item_ids({"a"});
    try {
      evaluate_run(rankings, relevance, {2});
      FAIL("expected MissingRelevance");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingRelevance);
      CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
  }

  TEST_CASE("csv and json exports keyed by metric and cutoff") {
    RankingsByUser rankings{{UserId("u"), item_ids({"x", "a"})}};
    std::map<UserId, RelevanceSet> relevance{{UserId("u"), {UserId("u"), rel({"a"})}}};
    const auto results = evaluate_run(rankings, relevance, {1, 2});
    const auto csv = metrics_to_csv(results);
    CHECK(csv.rfind("metric,n,users,mean\nHitRatio,1,1,0.000000\n", 0) == 0);
    CHECK(csv.find("NDCG,2,1,0.630930\n") != std::string::npos);
    const auto json = nlohmann::json::parse(metrics_to_json(results));
    REQUIRE(json.size() == 8);
    CHECK(json[7]["metric"] == "NDCG");
    CHECK(json[7]["n"] == 2);
    CHECK(json[7]["per_user"]["u"].get<double>() == doctest::Approx(0.6309297535714575).epsilon(1e-12));
  }
}
