#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "llmrerank/ingest.hpp"

namespace llmrerank {

inline constexpr std::size_t kDefaultSlateSize = 15;

enum class SlateSource { Random, ItemKnn, MatrixFactorization, External };

std::string_view to_string(SlateSource source) noexcept;
/// Accepts "random", "item-knn", "mf" / "matrix-factorization", "external".
SlateSource parse_slate_source(std::string_view name);

struct Slate {
  UserId user;
  std::vector<ItemId> items;
  SlateSource source = SlateSource::External;

  friend bool operator==(const Slate&, const Slate&) = default;
};

/// Throws InvalidArgument on wrong length, duplicates or a train-history item.
void validate_slate(const Slate& slate, std::size_t slate_size, const std::set<ItemId>& train_items);

// ---------------------------------------------------------------------------
// Random retrieval

/// Uniform sample without replacement of catalog items outside `exclusions`,
/// deterministic per (seed, user). Throws CatalogTooSmall.
Slate gen_random_slate(const UserId& user, const Catalog& catalog, const std::set<ItemId>& exclusions,
                       std::uint64_t seed, std::size_t slate_size = kDefaultSlateSize);

/// Random retrieval seeded with up to `inject_positives` held-out relevant
/// items; the rest is drawn uniformly and the whole slate is shuffled.
Slate gen_random_slate_with_positives(const UserId& user, const Catalog& catalog,
                                      const std::set<ItemId>& exclusions, std::size_t inject_positives,
                                      const RelevanceSet& relevance, std::uint64_t seed,
                                      std::size_t slate_size = kDefaultSlateSize);

// ---------------------------------------------------------------------------
// Matrix factorization

struct MfConfig {
  std::size_t factors = 32;
  std::size_t epochs = 30;
  double learn_rate = 0.005;
  double regularization = 0.02;
  /// Std-dev of the Gaussian factor initialisation; 0 gives all-zero factors.
  double init_std = 0.1;
  std::uint64_t seed = 42;
};

struct MfModel {
  std::size_t factors = 0;
  double global_mean = 0.0;
  std::map<UserId, std::vector<double>> user_factors;
  std::map<ItemId, std::vector<double>> item_factors;
  std::map<UserId, double> user_bias;
  std::map<ItemId, double> item_bias;
  /// Training RMSE after each epoch.
  std::vector<double> epoch_rmse;
};

/// Biased MF by SGD on squared error with L2 regularization. Throws
/// NonFiniteLoss when training diverges.
MfModel train_mf(const std::vector<Interaction>& train, const MfConfig& config = {});

/// global_mean + b_u + b_i + p_u . q_i; unknown users/items contribute zero.
double score_mf(const MfModel& model, const UserId& user, const ItemId& item);

// ---------------------------------------------------------------------------
// Item kNN

struct Neighbor {
  ItemId item;
  double similarity = 0.0;
};

struct ItemSimMatrix {
  /// Per item, neighbors by similarity descending (ties: ItemId ascending).
  std::map<ItemId, std::vector<Neighbor>> neighbors;

  /// Lookup in a's neighbor list; 0 when absent.
  double similarity(const ItemId& a, const ItemId& b) const;
  bool has_pair(const ItemId& a, const ItemId& b) const;
};

struct KnnConfig {
  std::size_t top_m = 50;
  std::size_t min_co_raters = 3;
};

/// Cosine similarity over item-mean-centered rating vectors, restricted to
/// co-raters. Pairs with too few co-raters or a zero-norm side are dropped.
ItemSimMatrix build_item_knn(const std::vector<Interaction>& train, const KnnConfig& config = {});

/// Sum over the user's rated items j of sim(j, candidate) * r_uj.
std::map<ItemId, double> knn_scores(const ItemSimMatrix& sims, const std::vector<Interaction>& user_rows);

// ---------------------------------------------------------------------------
// Model slates

/// Scores eligible items for one user. Higher is better.
using ItemScorer = std::function<double(const ItemId&)>;

struct ModelSlateRequest {
  std::size_t inject_positives = 5;
  std::size_t slate_size = kDefaultSlateSize;
  std::uint64_t seed = 42;
};

/// Injected positives plus the scorer's top eligible items, ordered by score
/// descending (ties: ItemId ascending). Throws CatalogTooSmall.
Slate gen_model_slate(const UserId& user, const ItemScorer& scorer, SlateSource source, const Catalog& catalog,
                      const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                      const ModelSlateRequest& request);

Slate gen_mf_slate(const UserId& user, const MfModel& model, const Catalog& catalog,
                   const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                   const ModelSlateRequest& request);

/// Throws UnknownUser when the user has no rated items.
Slate gen_knn_slate(const UserId& user, const ItemSimMatrix& sims, const std::vector<Interaction>& user_rows,
                    const Catalog& catalog, const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                    const ModelSlateRequest& request);

// ---------------------------------------------------------------------------
// Slate files: one {"user", "items", "source"} object per line.

std::string slates_to_jsonl(const std::vector<Slate>& slates);
/// Throws MalformedRow (detail = line).
std::vector<Slate> slates_from_jsonl(std::string_view content);

}  // namespace llmrerank
