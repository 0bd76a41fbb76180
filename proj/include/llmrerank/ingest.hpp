#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "llmrerank/ids.hpp"

namespace llmrerank {

inline constexpr double kMinRating = 0.5;
inline constexpr double kMaxRating = 5.0;
inline constexpr double kDefaultRelevanceThreshold = 4.0;
inline constexpr std::size_t kOverviewWordLimit = 15;
inline constexpr std::size_t kDefaultHistoryLimit = 10;

struct Interaction {
  UserId user;
  ItemId item;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ItemCard {
  ItemId id;
  std::string title;
  std::vector<std::string> genres;
  std::string language;
  /// At most 15 words once populated; empty until summarized.
  std::string overview_short;
  /// Full source overview, kept so it can be summarized later.
  std::string overview;

  friend bool operator==(const ItemCard&, const ItemCard&) = default;
};

class Catalog {
 public:
  /// Throws InvalidArgument on a duplicate id.
  void insert(ItemCard card);
  const ItemCard* find(const ItemId& id) const;
  /// Throws UnknownItem.
  const ItemCard& at(const ItemId& id) const;
  ItemCard& at_mut(const ItemId& id);
  bool contains(const ItemId& id) const { return items_.count(id) != 0; }
  std::size_t size() const noexcept { return items_.size(); }
  const std::map<ItemId, ItemCard>& items() const noexcept { return items_; }

 private:
  std::map<ItemId, ItemCard> items_;
};

struct RelevanceSet {
  UserId user;
  std::set<ItemId> relevant;
};

struct HistoryEntry {
  ItemId item;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

/// At most `limit` entries, timestamp descending (ties: ItemId ascending).
struct History {
  UserId user;
  std::vector<HistoryEntry> entries;
};

// ---------------------------------------------------------------------------
// Loading

struct RatingsFormat {
  char delimiter = ',';
  /// nullopt: treat the first line as a header when its rating column is not numeric.
  std::optional<bool> has_header;
  /// Skip malformed rows instead of throwing MalformedRow.
  bool lenient = false;
};

struct LoadedInteractions {
  std::vector<Interaction> rows;
  std::size_t skipped = 0;
};

/// Reads `user,item,rating,timestamp` rows. Throws MissingFile, or
/// MalformedRow (detail = 1-based line) unless the format is lenient.
LoadedInteractions load_interactions(const std::filesystem::path& path, const RatingsFormat& format = {});
LoadedInteractions parse_interactions(std::string_view content, const RatingsFormat& format = {});

/// Items file: CSV with a header naming id,title,genres,language,overview
/// (any order; genres split on '|'), or JSON lines with the same keys
/// (genres may be an array or a '|' string). Format picked by extension
/// (.jsonl / .json) or by the first non-blank character.
Catalog load_catalog(const std::filesystem::path& path);
Catalog parse_catalog_csv(std::string_view content);
Catalog parse_catalog_jsonl(std::string_view content);

/// Fills overview_short from overview when it already fits in 15 words.
void fill_short_overviews(Catalog& catalog);

/// "[id] title | g1|g2 | lang | overview_short". Empty genres, language or
/// overview render as "-". Throws EmptyTitle.
std::string build_item_description(const ItemCard& card);

// ---------------------------------------------------------------------------
// Splitting and history

struct SplitOptions {
  std::size_t n_test = 10;
  std::size_t min_history = 1;
  double relevance_threshold = kDefaultRelevanceThreshold;
};

struct Split {
  /// Input order preserved.
  std::vector<Interaction> train;
  /// Held-out rows of evaluated users, input order preserved.
  std::vector<Interaction> test;
  std::map<UserId, RelevanceSet> relevance;
  std::size_t filtered_users = 0;
};

/// For each user with at least min_history + n_test qualifying interactions
/// (rating >= threshold), the n_test most recent distinct qualifying items
/// form the RelevanceSet and every row of those items leaves train.
Split split_leave_n_out(const std::vector<Interaction>& interactions, const SplitOptions& options = {});

struct HistorySampling {
  std::size_t limit = kDefaultHistoryLimit;
  /// Set: uniform sample of `limit` rows under this seed instead of the most recent.
  std::optional<std::uint64_t> random_seed;
};

/// `rows` are the user's train interactions. Throws NoHistory when empty.
History sample_history(const UserId& user, const std::vector<Interaction>& rows, const HistorySampling& sampling = {});

/// Groups rows by user, preserving per-user input order.
std::map<UserId, std::vector<Interaction>> group_by_user(const std::vector<Interaction>& rows);

}  // namespace llmrerank
