#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "llmrerank/candgen.hpp"
#include "llmrerank/ingest.hpp"
#include "llmrerank/llm_client.hpp"

namespace llmrerank {

inline constexpr std::size_t kDefaultBootstraps = 3;

enum class RankerMode { None, ZeroShot, Trained };

std::string_view to_string(RankerMode mode) noexcept;
/// Accepts "none", "zero-shot", "trained".
RankerMode parse_ranker_mode(std::string_view name);

struct Prompt {
  std::string system;
  std::string user;
};

/// User text: a "User: <id>" line, a "User history:" block (one description
/// per entry plus its rating) and a "Candidates:" block in slate order.
/// Throws UnknownItem.
Prompt build_prompt(const History& history, const Slate& slate, const Catalog& catalog, RankerMode mode);

/// Item ids listed under a block header ("Candidates:" or "Ranking:") of a
/// prompt built by this module, in order.
std::vector<ItemId> listed_items(std::string_view user_prompt, std::string_view header = "Candidates:");
/// The id from the "User: <id>" line, empty when absent.
std::string prompt_user(std::string_view user_prompt);

// ---------------------------------------------------------------------------
// Parsing

struct RankedItem {
  ItemId item;
  std::size_t rank = 0;  // 1-based
  std::string reason;
};

struct RankingOutput {
  UserId user;
  std::vector<RankedItem> ranked;
  std::string raw_text;
  std::set<ItemId> missing;
  std::set<std::string> hallucinated;

  std::vector<ItemId> order() const;
};

enum class ParseMode { Strict, Lenient };

/// Lines of the form `Rank <k>: <item> - <reason>` (case-insensitive
/// "rank"). Items resolve by id, then by normalized title against the
/// slate's cards when a catalog is given. Strict mode throws
/// UnparseableOutput when a non-blank line breaks the grammar or no slate
/// item is recovered.
RankingOutput parse_ranking(std::string_view raw, const Slate& slate, const Catalog* catalog, ParseMode mode);

/// One `Rank k: <id> - <reason>` line per item.
std::string format_ranking(const std::vector<RankedItem>& ranked);

// ---------------------------------------------------------------------------
// Bootstrapping and aggregation

/// k seeded Fisher-Yates permutations of the slate, deterministic per (seed, user).
std::vector<Slate> bootstrap_shuffles(const Slate& slate, std::size_t k, std::uint64_t seed);

struct ConsensusEntry {
  ItemId item;
  std::size_t score = 0;

  friend bool operator==(const ConsensusEntry&, const ConsensusEntry&) = default;
};

struct ConsensusRanking {
  UserId user;
  /// Score ascending, ties by ItemId ascending.
  std::vector<ConsensusEntry> entries;

  std::vector<ItemId> order() const;
  friend bool operator==(const ConsensusRanking&, const ConsensusRanking&) = default;
};

/// score(item) = sum over outputs of its rank, or |slate|+1 when missing.
/// Throws EmptyOutputs, or SlateMismatch when an output does not cover
/// exactly the slate's items.
ConsensusRanking aggregate_self_consistency(const std::vector<RankingOutput>& outputs, const Slate& slate);

/// Identity order, scores 1..|slate|.
ConsensusRanking none_ranker(const Slate& slate);

/// All slate items missing; stands in for a failed bootstrap.
RankingOutput all_missing_output(const Slate& slate, std::string raw_text = {});

struct RerankOptions {
  std::size_t bootstraps = kDefaultBootstraps;
  RankerMode mode = RankerMode::Trained;
  std::uint64_t seed = 42;
  ParseMode parse_mode = ParseMode::Lenient;
  double temperature = kInferenceTemperature;
  std::size_t max_tokens = 1024;
};

struct RerankResult {
  ConsensusRanking consensus;
  std::vector<Slate> shuffles;
  std::vector<RankingOutput> outputs;
  /// Per bootstrap: empty on success, else the failure message.
  std::vector<std::string> failures;
  /// Every bootstrap failed and the slate order was kept.
  bool fell_back = false;
};

/// shuffles -> prompts -> complete_batch -> parse -> aggregate. Failed
/// bootstraps count as all-missing. When all fail, lenient mode falls back
/// to the slate order; strict mode throws AllBootstrapsFailed.
RerankResult rerank_user(const History& history, const Slate& slate, const Catalog& catalog, ChatBackend& backend,
                         const RerankOptions& options);

/// One JSON object: {user, shuffles, raw_texts, parsed, consensus}.
std::string rerank_trace_json(const RerankResult& result);

}  // namespace llmrerank
