#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <vector>

#include "llmrerank/candgen.hpp"
#include "llmrerank/config.hpp"
#include "llmrerank/ingest.hpp"
#include "llmrerank/llm_client.hpp"

namespace llmrerank {

/// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitError = 2;

/// Artifacts written by cmd_ingest and read back by later subcommands.
struct RunData {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
  Catalog catalog;
  std::map<UserId, RelevanceSet> relevance;
};

RunData load_run_data(const std::filesystem::path& run_dir);

/// Backend for one ranker mode; scripted responders get the relevance sets.
std::unique_ptr<ChatBackend> make_backend(const RunConfig& config, RankerMode mode,
                                          const std::map<UserId, RelevanceSet>& relevance);

/// Seeded sample of at most `count` users, returned in id order.
std::vector<UserId> sample_users(const std::map<UserId, RelevanceSet>& relevance, std::size_t count,
                                 std::uint64_t seed, std::string_view purpose);

struct SlateBatch {
  std::vector<Slate> slates;
  /// User -> reason the slate could not be built.
  std::map<UserId, std::string> skipped;
};

/// Slates for `users` from the configured generator.
SlateBatch generate_slates(const RunConfig& config, const RunData& data, const std::vector<UserId>& users);

/// Each returns a process exit code; errors propagate as Error.
int cmd_ingest(const RunConfig& config, std::ostream& out);
int cmd_run(const RunConfig& config, std::ostream& out);
int cmd_build_dataset(const RunConfig& config, std::ostream& out);
int cmd_export_slates(const RunConfig& config, const std::filesystem::path& destination, std::ostream& out);
int cmd_import_slates(const RunConfig& config, const std::filesystem::path& source, std::ostream& out);

struct HumanEvalOptions {
  bool paired = false;
  bool equal_variance = false;
};

/// One Likert score in [1, 5] per non-blank line. Throws MalformedRow.
std::vector<double> read_likert_scores(const std::filesystem::path& path);

int cmd_human_eval(const std::filesystem::path& ratings_a, const std::filesystem::path& ratings_b,
                   const HumanEvalOptions& options, std::ostream& out);

}  // namespace llmrerank
