#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "llmrerank/ingest.hpp"
#include "llmrerank/llm_client.hpp"
#include "llmrerank/rerank.hpp"

namespace llmrerank {

struct SftSample {
  UserId user;
  /// Ground-truth order the completion encodes.
  std::vector<ItemId> ranking;
  std::string prompt;
  std::string completion;
};

struct DpoPair {
  UserId user;
  std::string prompt;
  std::string chosen;
  std::string rejected;
};

/// Summary of at most 15 words. Overviews that already fit are returned
/// unchanged without a call; otherwise the backend is asked (once more if
/// the answer is too long) and the result is cut to 15 words. A null
/// backend truncates directly.
std::string summarize_overview(ChatBackend* backend, std::string_view full_overview);

/// Populates every empty overview_short. Returns the number of backend calls.
std::size_t summarize_catalog(Catalog& catalog, ChatBackend* backend);

struct RankingShape {
  std::size_t size = 15;
  /// Irrelevant items appended after the relevant ones.
  std::size_t negatives = 5;
};

/// Held-out relevant items by rating then timestamp (both descending), then
/// `negatives` seeded catalog items the user never interacted with.
std::vector<ItemId> build_correct_ranking(const UserId& user, const std::vector<Interaction>& held_out_rows,
                                          const std::set<ItemId>& interacted, const Catalog& catalog,
                                          const RankingShape& shape, std::uint64_t seed);

/// Prompt asking for one reason per item, keeping the given order.
Prompt build_reason_prompt(const History& history, const std::vector<ItemId>& ranking, const Catalog& catalog);

/// Deterministic reason from genre overlap with the user's liked history.
std::string offline_reason(const History& history, const ItemCard& card, const Catalog& catalog);

/// Prompt = inference prompt over a seeded shuffle of the ranking;
/// completion = the ranking with one reason per item. With a backend the
/// reasons are generated (one retry on reordering, then
/// GenerationOrderDrift); a null backend uses offline reasons.
SftSample make_positive_sample(ChatBackend* backend, const History& history,
                               const std::vector<ItemId>& correct_ranking, const Catalog& catalog,
                               std::uint64_t seed);

/// Rejected = seeded non-identity permutation of the chosen lines, renumbered,
/// reasons carried over. Throws InvalidArgument for rankings of < 2 items.
DpoPair make_dpo_pair(const SftSample& positive, std::uint64_t seed);

/// As above, but reasons for the incorrect order are regenerated by the
/// backend; falls back to carried-over reasons if the backend reorders twice.
DpoPair make_dpo_pair(const SftSample& positive, std::uint64_t seed, ChatBackend& backend, const History& history,
                      const Catalog& catalog);

struct FileEntry {
  std::string file;
  std::size_t count = 0;
  std::string sha256;
};

struct TrainingManifest {
  FileEntry sft;
  FileEntry dpo;
};

/// Writes sft.jsonl, dpo.jsonl and manifest.json (atomic renames). Throws IoError.
TrainingManifest write_training_files(const std::vector<SftSample>& samples, const std::vector<DpoPair>& pairs,
                                      const std::filesystem::path& out_dir);

std::string sft_to_jsonl(const std::vector<SftSample>& samples);
std::string dpo_to_jsonl(const std::vector<DpoPair>& pairs);
/// Only prompt/completion (resp. prompt/chosen/rejected) are restored.
std::vector<SftSample> sft_from_jsonl(std::string_view content);
std::vector<DpoPair> dpo_from_jsonl(std::string_view content);

}  // namespace llmrerank
