#include "llmrerank/workflow.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "io.hpp"
#include "llmrerank/datasetgen.hpp"
#include "llmrerank/metrics.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/rerank.hpp"
#include "llmrerank/responders.hpp"
#include "llmrerank/stats.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kTrainFile = "train.csv";
constexpr const char* kTestFile = "test.csv";
constexpr const char* kCatalogFile = "catalog.jsonl";
constexpr const char* kRelevanceFile = "relevance.jsonl";
constexpr const char* kExternalSlatesFile = "slates.external.jsonl";

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string rating_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string interactions_csv(const std::vector<Interaction>& rows) {
  std::string out = "userId,itemId,rating,timestamp\n";
  for (const auto& r : rows) {
    out += csv::escape(r.user.str()) + ',' + csv::escape(r.item.str()) + ',' + rating_text(r.rating) + ',' +
           std::to_string(r.timestamp) + '\n';
  }
  return out;
}

std::string catalog_jsonl(const Catalog& catalog) {
  std::string out;
  for (const auto& [id, card] : catalog.items()) {
    json j;
    j["id"] = id.str();
    j["title"] = card.title;
    j["genres"] = card.genres;
    j["language"] = card.language;
    j["overview"] = card.overview;
    j["overview_short"] = card.overview_short;
    out += j.dump() + '\n';
  }
  return out;
}

std::string relevance_jsonl(const std::map<UserId, RelevanceSet>& relevance) {
  std::string out;
  for (const auto& [user, set] : relevance) {
    json items = json::array();
    for (const auto& i : set.relevant) items.push_back(i.str());
    out += json{{"user", user.str()}, {"items", items}}.dump() + '\n';
  }
  return out;
}

std::map<UserId, RelevanceSet> parse_relevance(std::string_view content) {
  std::map<UserId, RelevanceSet> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      RelevanceSet set{UserId(j.at("user").get<std::string>()), {}};
      for (const auto& i : j.at("items")) set.relevant.insert(ItemId(i.get<std::string>()));
      out[set.user] = std::move(set);
    } catch (const json::exception& e) {
      fail(ErrorCode::MalformedRow, "relevance line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

/// Prefixes errors with the file they came from.
template <typename F>
auto with_path(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingFile) throw;
    throw Error(e.code(), path.string() + ": " + e.what(), e.detail());
  }
}

std::set<ItemId> items_of(const std::vector<Interaction>& rows) {
  std::set<ItemId> out;
  for (const auto& r : rows) out.insert(r.item);
  return out;
}

const std::vector<Interaction>& rows_for(const std::map<UserId, std::vector<Interaction>>& by_user,
                                         const UserId& user) {
  static const std::vector<Interaction> kEmpty;
  const auto it = by_user.find(user);
  return it == by_user.end() ? kEmpty : it->second;
}

HistorySampling history_sampling(const RunConfig& config) {
  return {config.history_limit, config.history_random_seed};
}

std::vector<RankerMode> ranker_modes(const RunConfig& config) {
  std::vector<RankerMode> modes;
  for (const auto m : config.modes) {
    if (m != RankerMode::None && std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }
  std::sort(modes.begin(), modes.end());
  return modes;
}

std::string mode_title(RankerMode m) {
  switch (m) {
    case RankerMode::None: return "None Ranker";
    case RankerMode::ZeroShot: return "Zero-shot";
    case RankerMode::Trained: return "SFT+DPO";
  }
  return "";
}

/// Runs fn(i) for i in [0, n) on `workers` threads.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

RunData load_run_data(const fs::path& run_dir) {
  RunData data;
  RatingsFormat format;
  format.has_header = true;
  const auto train_path = run_dir / kTrainFile;
  const auto test_path = run_dir / kTestFile;
  const auto catalog_path = run_dir / kCatalogFile;
  const auto relevance_path = run_dir / kRelevanceFile;
  data.train = with_path(train_path, [&] { return load_interactions(train_path, format).rows; });
  data.test = with_path(test_path, [&] { return load_interactions(test_path, format).rows; });
  data.catalog = with_path(catalog_path, [&] { return load_catalog(catalog_path); });
  data.relevance = with_path(relevance_path, [&] { return parse_relevance(io::read_file(relevance_path)); });
  return data;
}

std::unique_ptr<ChatBackend> make_backend(const RunConfig& config, RankerMode mode,
                                          const std::map<UserId, RelevanceSet>& relevance) {
  const auto cap = config.backend.max_concurrent_requests;
  if (config.backend.kind == BackendKind::Http) {
    auto backend_config = config.backend;
    backend_config.model = model_for(config, mode);
    validate_backend_config(backend_config);
    return make_http_backend(backend_config);
  }
  switch (config.script) {
    case ScriptKind::Echo:
      return std::make_unique<ScriptedBackend>(make_echo_responder(), cap);
    case ScriptKind::Oracle: {
      std::map<UserId, std::set<ItemId>> sets;
      for (const auto& [user, set] : relevance) sets[user] = set.relevant;
      return std::make_unique<ScriptedBackend>(
          make_oracle_responder(std::move(sets), config.fidelity, derive_seed(config.seed, "oracle")), cap);
    }
    case ScriptKind::Fixture: {
      if (config.fixture.empty()) fail(ErrorCode::Config, "backend.script = fixture needs backend.fixture");
      auto fixture = with_path(config.fixture, [&] { return ScriptedFixture::from_jsonl(io::read_file(config.fixture)); });
      return std::make_unique<ScriptedBackend>(std::move(fixture), Responder{}, cap);
    }
  }
  fail(ErrorCode::Config, "unsupported backend");
}

std::vector<UserId> sample_users(const std::map<UserId, RelevanceSet>& relevance, std::size_t count,
                                 std::uint64_t seed, std::string_view purpose) {
  std::vector<UserId> users;
  for (const auto& [user, set] : relevance) users.push_back(user);
  if (users.size() > count) {
    Rng rng(derive_seed(seed, "sample:" + std::string(purpose)));
    rng.shuffle(std::span(users));
    users.resize(count);
    std::sort(users.begin(), users.end());
  }
  return users;
}

SlateBatch generate_slates(const RunConfig& config, const RunData& data, const std::vector<UserId>& users) {
  SlateBatch batch;
  const auto by_user = group_by_user(data.train);
  ModelSlateRequest request{config.inject_positives, config.slate_size, config.seed};

  std::optional<MfModel> mf;
  std::optional<ItemSimMatrix> knn;
  std::map<UserId, Slate> external;
  switch (config.generator) {
    case SlateSource::MatrixFactorization: {
      auto mf_config = config.mf;
      mf_config.seed = config.seed;
      mf = train_mf(data.train, mf_config);
      break;
    }
    case SlateSource::ItemKnn:
      knn = build_item_knn(data.train, config.knn);
      break;
    case SlateSource::External: {
      const auto path = config.external_slates.empty() ? config.run_dir / kExternalSlatesFile : config.external_slates;
      for (auto& s : with_path(path, [&] { return slates_from_jsonl(io::read_file(path)); })) {
        const auto user = s.user;
        external[user] = std::move(s);
      }
      break;
    }
    case SlateSource::Random:
      break;
  }

  for (const auto& user : users) {
    const auto& rows = rows_for(by_user, user);
    const auto exclusions = items_of(rows);
    const auto rel_it = data.relevance.find(user);
    const RelevanceSet relevance = rel_it == data.relevance.end() ? RelevanceSet{user, {}} : rel_it->second;
    try {
      Slate slate;
      switch (config.generator) {
        case SlateSource::Random:
          slate = gen_random_slate_with_positives(user, data.catalog, exclusions, config.inject_positives, relevance,
                                                  config.seed, config.slate_size);
          break;
        case SlateSource::MatrixFactorization:
          slate = gen_mf_slate(user, *mf, data.catalog, exclusions, relevance, request);
          break;
        case SlateSource::ItemKnn:
          slate = gen_knn_slate(user, *knn, rows, data.catalog, exclusions, relevance, request);
          break;
        case SlateSource::External: {
          const auto it = external.find(user);
          if (it == external.end()) fail(ErrorCode::UnknownUser, "no external slate for user " + user.str());
          slate = it->second;
          validate_slate(slate, config.slate_size, exclusions);
          for (const auto& item : slate.items) data.catalog.at(item);
          break;
        }
      }
      batch.slates.push_back(std::move(slate));
    } catch (const Error& e) {
      batch.skipped[user] = e.what();
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& config, std::ostream& out) {
  if (config.ratings.empty()) fail(ErrorCode::Config, "data.ratings is not set");
  if (config.items.empty()) fail(ErrorCode::Config, "data.items is not set");

  RatingsFormat format;
  format.lenient = config.lenient_rows;
  auto loaded = with_path(config.ratings, [&] { return load_interactions(config.ratings, format); });
  auto catalog = with_path(config.items, [&] { return load_catalog(config.items); });

  std::vector<Interaction> rows;
  rows.reserve(loaded.rows.size());
  std::size_t unknown_items = 0;
  for (auto& r : loaded.rows) {
    if (catalog.contains(r.item)) {
      rows.push_back(std::move(r));
    } else {
      ++unknown_items;
    }
  }

  std::size_t summary_calls = 0;
  if (config.summarize_with_backend) {
    auto backend = make_backend(config, RankerMode::None, {});
    summary_calls = summarize_catalog(catalog, backend.get());
  } else {
    summarize_catalog(catalog, nullptr);
  }

  const auto split = split_leave_n_out(rows, {config.n_test, config.min_history, config.relevance_threshold});
  std::set<UserId> users;
  for (const auto& r : rows) users.insert(r.user);

  const auto& dir = config.run_dir;
  io::write_file_atomic(dir / kTrainFile, interactions_csv(split.train));
  io::write_file_atomic(dir / kTestFile, interactions_csv(split.test));
  io::write_file_atomic(dir / kCatalogFile, catalog_jsonl(catalog));
  io::write_file_atomic(dir / kRelevanceFile, relevance_jsonl(split.relevance));
  io::write_file_atomic(dir / "config.ini", render_config(config));

  json summary;
  summary["users"] = users.size();
  summary["items"] = catalog.size();
  summary["interactions"] = rows.size();
  summary["eval_users"] = split.relevance.size();
  summary["filtered_users"] = split.filtered_users;
  summary["skipped_rows"] = loaded.skipped;
  summary["unknown_item_rows"] = unknown_items;
  summary["train_rows"] = split.train.size();
  summary["test_rows"] = split.test.size();
  summary["summary_calls"] = summary_calls;
  io::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");

  out << "users: " << users.size() << "\n"
      << "items: " << catalog.size() << "\n"
      << "interactions: " << rows.size() << "\n"
      << "eval users: " << split.relevance.size() << "\n";
  if (split.filtered_users) out << "users below the evaluation bar: " << split.filtered_users << "\n";
  if (loaded.skipped) out << "malformed rows skipped: " << loaded.skipped << "\n";
  if (unknown_items) out << "rows with unknown items dropped: " << unknown_items << "\n";
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

namespace {

struct UserOutcome {
  std::map<RankerMode, RerankResult> results;
  std::string error;
};

json metric_results_json(const std::vector<MetricResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    json per_user = json::object();
    for (const auto& [user, v] : r.per_user) per_user[user.str()] = v;
    arr.push_back({{"metric", std::string(to_string(r.metric))}, {"n", r.n}, {"mean", r.mean}, {"per_user", per_user}});
  }
  return arr;
}

json comparison_json(const std::vector<ComparisonRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json j{{"metric", std::string(to_string(row.metric))}, {"n", row.n}, {"mean", row.mean_a}, {"mean_none", row.mean_b}};
    if (row.test) {
      j["t"] = row.test->t_value;
      j["df"] = row.test->degrees_of_freedom;
      j["p"] = row.test->p_value;
      j["stars"] = row.test->stars;
    } else {
      j["t"] = nullptr;
      j["p"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string report_csv(const std::vector<MetricResult>& none, const std::map<RankerMode, std::vector<MetricResult>>& llm,
                       const std::map<RankerMode, std::vector<ComparisonRow>>& cmp) {
  auto value = [&](RankerMode m, std::size_t row) -> std::string {
    const auto it = llm.find(m);
    return it == llm.end() ? "" : fixed(it->second[row].mean);
  };
  auto p = [&](RankerMode m, std::size_t row) -> std::string {
    const auto it = cmp.find(m);
    return it == cmp.end() ? "" : format_p(it->second[row].test);
  };
  std::string out = "metric,n,non_ranker,zero_shot,sft_dpo,p_zero_vs_non,p_sft_vs_non\n";
  for (std::size_t i = 0; i < none.size(); ++i) {
    out += std::string(to_string(none[i].metric)) + ',' + std::to_string(none[i].n) + ',' + fixed(none[i].mean) + ',' +
           value(RankerMode::ZeroShot, i) + ',' + value(RankerMode::Trained, i) + ',' + p(RankerMode::ZeroShot, i) +
           ',' + p(RankerMode::Trained, i) + '\n';
  }
  return out;
}

std::string report_table(const std::vector<MetricResult>& none,
                         const std::map<RankerMode, std::vector<MetricResult>>& llm,
                         const std::map<RankerMode, std::vector<ComparisonRow>>& cmp) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Metric", mode_title(RankerMode::None)};
  for (const auto& [m, r] : llm) header.push_back(mode_title(m));
  cells.push_back(header);
  for (std::size_t i = 0; i < none.size(); ++i) {
    std::vector<double> values{none[i].mean};
    for (const auto& [m, r] : llm) values.push_back(r[i].mean);
    // Bold goes to the best value as printed, so ties share it.
    std::string best;
    for (const auto v : values) best = std::max(best, fixed(v));
    std::vector<std::string> row{metric_label(none[i].metric, none[i].n)};
    std::size_t col = 0;
    for (const auto v : values) {
      auto cell = fixed(v);
      if (cell == best) cell = "**" + cell + "**";
      if (col > 0) {
        const auto mode = std::next(llm.begin(), static_cast<std::ptrdiff_t>(col - 1))->first;
        const auto& test = cmp.at(mode)[i].test;
        if (test && !test->stars.empty()) cell += " " + test->stars;
      }
      row.push_back(cell);
      ++col;
    }
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      auto cell = cells[r][c];
      cell.resize(width[c], ' ');
      out += (c ? " | " : "") + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) out += (c ? "-|-" : "") + std::string(width[c], '-');
      out += '\n';
    }
  }
  out += "Stars: * p <= 0.05, ** p <= 0.01, *** p <= 0.001 (paired t-test against the none ranker).\n";
  return out;
}

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& out) {
  const auto data = load_run_data(config.run_dir);
  const auto by_user = group_by_user(data.train);
  const auto users = sample_users(data.relevance, config.sample_count, config.seed, "eval");
  auto batch = generate_slates(config, data, users);
  std::map<UserId, std::string> skipped = batch.skipped;

  const auto modes = ranker_modes(config);
  std::map<RankerMode, std::unique_ptr<ChatBackend>> backends;
  for (const auto m : modes) backends[m] = make_backend(config, m, data.relevance);

  std::vector<UserOutcome> outcomes(batch.slates.size());
  parallel_for(batch.slates.size(), config.workers, [&](std::size_t i) {
    const auto& slate = batch.slates[i];
    auto& outcome = outcomes[i];
    try {
      const auto history = sample_history(slate.user, rows_for(by_user, slate.user), history_sampling(config));
      for (const auto m : modes) {
        RerankOptions options;
        options.bootstraps = config.bootstraps;
        options.mode = m;
        options.seed = config.seed;
        options.parse_mode = config.parse_mode;
        options.temperature = config.temperature;
        outcome.results.emplace(m, rerank_user(history, slate, data.catalog, *backends.at(m), options));
      }
    } catch (const Error& e) {
      outcome.error = e.what();
    }
  });

  RankingsByUser none_rankings;
  std::map<RankerMode, RankingsByUser> llm_rankings;
  std::vector<Slate> kept_slates;
  std::string traces;
  std::size_t fell_back = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& slate = batch.slates[i];
    if (!outcomes[i].error.empty()) {
      skipped[slate.user] = outcomes[i].error;
      continue;
    }
    kept_slates.push_back(slate);
    none_rankings[slate.user] = none_ranker(slate).order();
    for (const auto& [m, result] : outcomes[i].results) {
      llm_rankings[m][slate.user] = result.consensus.order();
      fell_back += result.fell_back ? 1 : 0;
      auto trace = nlohmann::ordered_json::parse(rerank_trace_json(result));
      trace["mode"] = std::string(to_string(m));
      traces += trace.dump() + '\n';
    }
  }
  if (none_rankings.empty()) fail(ErrorCode::InvalidArgument, "no user could be evaluated");

  const auto none_results = evaluate_run(none_rankings, data.relevance, config.cutoffs);
  std::map<RankerMode, std::vector<MetricResult>> llm_results;
  std::map<RankerMode, std::vector<ComparisonRow>> comparisons;
  for (const auto m : modes) {
    llm_results[m] = evaluate_run(llm_rankings[m], data.relevance, config.cutoffs);
    if (none_rankings.size() >= 2) {
      comparisons[m] = compare_models(llm_results[m], none_results);
    } else {
      for (const auto& r : llm_results[m]) {
        comparisons[m].push_back({r.metric, r.n, r.mean, 0.0, std::nullopt});
      }
    }
  }

  json report;
  report["seed"] = config.seed;
  report["generator"] = std::string(to_string(config.generator));
  report["slate_size"] = config.slate_size;
  report["bootstraps"] = config.bootstraps;
  report["cutoffs"] = config.cutoffs;
  report["sampled_users"] = users.size();
  report["evaluated_users"] = none_rankings.size();
  json skipped_json = json::object();
  for (const auto& [user, why] : skipped) skipped_json[user.str()] = why;
  report["skipped"] = skipped_json;
  report["fell_back"] = fell_back;
  json rankers;
  rankers[std::string(to_string(RankerMode::None))] = metric_results_json(none_results);
  for (const auto& [m, r] : llm_results) rankers[std::string(to_string(m))] = metric_results_json(r);
  report["rankers"] = rankers;
  json cmp_json = json::object();
  for (const auto& [m, rows] : comparisons) cmp_json[std::string(to_string(m))] = comparison_json(rows);
  report["comparisons"] = cmp_json;

  const auto table = report_table(none_results, llm_results, comparisons);
  const auto& dir = config.run_dir;
  io::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  io::write_file_atomic(dir / "report.csv", report_csv(none_results, llm_results, comparisons));
  io::write_file_atomic(dir / "report.txt", table);
  io::write_file_atomic(dir / "traces.jsonl", traces);
  io::write_file_atomic(dir / "slates.jsonl", slates_to_jsonl(kept_slates));
  io::write_file_atomic(dir / "run_config.ini", render_config(config));

  out << table;
  out << "evaluated users: " << none_rankings.size() << "\n";
  if (fell_back) out << "rankings that kept the slate order after failed bootstraps: " << fell_back << "\n";
  if (!skipped.empty()) {
    out << "skipped users: " << skipped.size() << "\n";
    for (const auto& [user, why] : skipped) out << "  " << user.str() << ": " << why << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_build_dataset(const RunConfig& config, std::ostream& out) {
  if (config.ranking_size < 2) {
    fail(ErrorCode::InvalidArgument, "dataset.ranking_size must be at least 2 to form preference pairs");
  }
  const auto data = load_run_data(config.run_dir);
  const auto train_by_user = group_by_user(data.train);
  const auto test_by_user = group_by_user(data.test);
  const auto users = sample_users(data.relevance, config.dataset_users, config.seed, "dataset");

  std::unique_ptr<ChatBackend> backend;
  if (!config.offline) backend = make_backend(config, RankerMode::None, data.relevance);

  const RankingShape shape{config.ranking_size, config.negatives};
  std::vector<SftSample> samples;
  std::vector<DpoPair> pairs;
  std::map<std::string, std::size_t> drops;
  for (const auto& user : users) {
    try {
      const auto& train_rows = rows_for(train_by_user, user);
      const auto& test_rows = rows_for(test_by_user, user);
      const auto history = sample_history(user, train_rows, history_sampling(config));
      auto interacted = items_of(train_rows);
      for (const auto& r : test_rows) interacted.insert(r.item);
      const auto ranking = build_correct_ranking(user, test_rows, interacted, data.catalog, shape, config.seed);
      if (ranking.size() < 2) fail(ErrorCode::CatalogTooSmall, "ranking for " + user.str() + " has fewer than 2 items");
      auto sample = make_positive_sample(backend.get(), history, ranking, data.catalog, config.seed);
      for (std::size_t j = 0; j < config.pairs_per_sample; ++j) {
        const auto pair_seed = j == 0 ? config.seed : derive_seed(config.seed, "pair:" + std::to_string(j));
        if (backend && config.regenerate_rejected) {
          pairs.push_back(make_dpo_pair(sample, pair_seed, *backend, history, data.catalog));
        } else {
          pairs.push_back(make_dpo_pair(sample, pair_seed));
        }
      }
      samples.push_back(std::move(sample));
    } catch (const Error& e) {
      ++drops[std::string(to_string(e.code()))];
    }
  }

  const auto manifest = write_training_files(samples, pairs, config.run_dir / "dataset");
  out << "users: " << users.size() << "\n"
      << manifest.sft.file << ": " << manifest.sft.count << " samples\n"
      << manifest.dpo.file << ": " << manifest.dpo.count << " pairs\n";
  std::size_t dropped = 0;
  for (const auto& [code, n] : drops) {
    out << "dropped (" << code << "): " << n << "\n";
    dropped += n;
  }
  return dropped ? kExitPartial : kExitOk;
}

int cmd_export_slates(const RunConfig& config, const fs::path& destination, std::ostream& out) {
  const auto data = load_run_data(config.run_dir);
  const auto users = sample_users(data.relevance, config.sample_count, config.seed, "eval");
  const auto batch = generate_slates(config, data, users);
  const auto path = destination.empty() ? config.run_dir / "slates.jsonl" : destination;
  io::write_file_atomic(path, slates_to_jsonl(batch.slates));
  out << "exported " << batch.slates.size() << " slates to " << path.string() << "\n";
  for (const auto& [user, why] : batch.skipped) out << "  skipped " << user.str() << ": " << why << "\n";
  return batch.skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_import_slates(const RunConfig& config, const fs::path& source, std::ostream& out) {
  const auto data = load_run_data(config.run_dir);
  const auto train_by_user = group_by_user(data.train);
  auto slates = with_path(source, [&] { return slates_from_jsonl(io::read_file(source)); });
  std::set<UserId> seen;
  for (std::size_t i = 0; i < slates.size(); ++i) {
    auto& slate = slates[i];
    const auto where = source.string() + ": slate " + std::to_string(i + 1);
    if (!seen.insert(slate.user).second) fail(ErrorCode::MalformedRow, where + ": duplicate user " + slate.user.str(), i + 1);
    try {
      validate_slate(slate, config.slate_size, items_of(rows_for(train_by_user, slate.user)));
      for (const auto& item : slate.items) data.catalog.at(item);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what(), i + 1);
    }
    slate.source = SlateSource::External;
  }
  const auto path = config.run_dir / kExternalSlatesFile;
  io::write_file_atomic(path, slates_to_jsonl(slates));
  out << "imported " << slates.size() << " slates into " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<double> read_likert_scores(const fs::path& path) {
  const auto content = io::read_file(path);
  std::vector<double> scores;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{} || ptr != line.data() + line.size() || !std::isfinite(v) || v < 1.0 || v > 5.0) {
      fail(ErrorCode::MalformedRow,
           path.string() + ":" + std::to_string(line_no) + ": expected a score in [1, 5], got '" + std::string(line) + "'",
           line_no);
    }
    scores.push_back(v);
  }
  return scores;
}

int cmd_human_eval(const fs::path& ratings_a, const fs::path& ratings_b, const HumanEvalOptions& options,
                   std::ostream& out) {
  const auto a = read_likert_scores(ratings_a);
  const auto b = read_likert_scores(ratings_b);
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (const auto x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  out << "A: n=" << a.size() << " mean=" << fixed(mean(a), 3) << "\n"
      << "B: n=" << b.size() << " mean=" << fixed(mean(b), 3) << "\n";
  const char* name = options.paired ? "paired t-test" : options.equal_variance ? "Student t-test" : "Welch t-test";
  out << "test: " << name << "\n";
  try {
    const auto r = options.paired ? paired_t_test(a, b) : two_sample_t_test(a, b, options.equal_variance);
    out << "t = " << fixed(r.t_value) << "\n"
        << "df = " << fixed(r.degrees_of_freedom, 2) << "\n"
        << "p = " << fixed(r.p_value) << r.stars << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
    out << "no difference (zero variance)\n";
  }
  return kExitOk;
}

}  // namespace llmrerank
