#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "llmrerank/candgen.hpp"
#include "llmrerank/llm_client.hpp"
#include "llmrerank/rerank.hpp"

namespace llmrerank {

/// Flat `section.key` -> value pairs read from an INI-style file:
///   [section]
///   key = value     ; or # comments
using ConfigMap = std::map<std::string, std::string>;

/// Throws Config on syntax errors.
ConfigMap parse_config_text(std::string_view content);

enum class ScriptKind { Echo, Oracle, Fixture };

struct RunConfig {
  // [data]
  std::filesystem::path ratings;
  std::filesystem::path items;
  std::filesystem::path run_dir = "run";
  bool lenient_rows = false;

  // [split]
  std::size_t n_test = 10;
  std::size_t min_history = 1;
  double relevance_threshold = kDefaultRelevanceThreshold;
  std::size_t history_limit = kDefaultHistoryLimit;
  /// Set: random history sampling under this seed.
  std::optional<std::uint64_t> history_random_seed;

  // [candgen]
  SlateSource generator = SlateSource::Random;
  std::size_t slate_size = kDefaultSlateSize;
  std::size_t inject_positives = 5;
  std::filesystem::path external_slates;
  MfConfig mf;
  KnnConfig knn;

  // [run]
  std::uint64_t seed = 42;
  std::size_t sample_count = 1000;
  std::size_t bootstraps = kDefaultBootstraps;
  std::vector<std::size_t> cutoffs = {3, 5, 10};
  /// LLM rankers to run; the none ranker is always evaluated.
  std::vector<RankerMode> modes = {RankerMode::Trained};
  std::size_t workers = 1;
  ParseMode parse_mode = ParseMode::Lenient;
  double temperature = kInferenceTemperature;

  // [backend]
  BackendConfig backend;
  std::string zero_shot_model;
  std::string trained_model;
  ScriptKind script = ScriptKind::Echo;
  std::filesystem::path fixture;
  double fidelity = 1.0;

  // [dataset]
  bool offline = true;
  std::size_t dataset_users = 100;
  std::size_t ranking_size = 15;
  std::size_t negatives = 5;
  std::size_t pairs_per_sample = 1;
  bool regenerate_rejected = false;
  /// Summarize long overviews through the backend at ingest time.
  bool summarize_with_backend = false;
};

/// Every recognised `section.key`, in canonical order.
const std::vector<std::string>& config_keys();

/// Applies values over `base`. Throws Config on unknown keys or bad values.
RunConfig apply_config(const ConfigMap& values, RunConfig base = {});

/// Defaults, then the file (if given), then overrides. Throws Config / MissingFile.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const ConfigMap& overrides = {});

/// Canonical INI rendering; never includes secrets.
std::string render_config(const RunConfig& config);

/// Model name for one ranker mode (mode-specific override or backend.model).
std::string model_for(const RunConfig& config, RankerMode mode);

}  // namespace llmrerank
