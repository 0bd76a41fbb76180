#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "llmrerank/datasetgen.hpp"
#include "llmrerank/error.hpp"
#include "llmrerank/metrics.hpp"
#include "llmrerank/text.hpp"
#include "llmrerank/workflow.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace llmrerank;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

/// Corpus written to `dir`, plus a config pointing at it.
RunConfig corpus_config(const std::filesystem::path& dir, const testing::CorpusShape& shape = {}) {
  testing::write_corpus(testing::make_corpus(shape), dir);
  RunConfig c;
  c.ratings = dir / "ratings.csv";
  c.items = dir / "items.csv";
  c.run_dir = dir / "run";
  c.sample_count = 40;
  return c;
}

RunConfig ingested(const std::filesystem::path& dir, const testing::CorpusShape& shape = {}) {
  auto c = corpus_config(dir, shape);
  std::ostringstream out;
  REQUIRE(cmd_ingest(c, out) == kExitOk);
  return c;
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (const auto& l : text::split(s, '\n')) n += l.empty() ? 0 : 1;
  return n;
}

const json& ranker_metric(const json& report, const std::string& ranker, const std::string& metric, std::size_t n) {
  for (const auto& r : report["rankers"][ranker]) {
    if (r["metric"] == metric && r["n"] == n) return r;
  }
  FAIL("metric not found");
  static const json kNull;
  return kNull;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("writes the run directory deterministically") {
    testing::TempDir dir;
    auto c = corpus_config(dir.path());
    std::ostringstream out;
    REQUIRE(cmd_ingest(c, out) == kExitOk);
    CHECK(out.str().find("users: 60") != std::string::npos);
    CHECK(out.str().find("items: 200") != std::string::npos);

    const auto run = c.run_dir;
    std::map<std::string, std::string> first;
    for (const auto* f : {"train.csv", "test.csv", "catalog.jsonl", "relevance.jsonl", "summary.json", "config.ini"}) {
      REQUIRE(std::filesystem::exists(run / f));
      first[f] = testing::read_text(run / f);
    }
    REQUIRE(cmd_ingest(c, out) == kExitOk);
    for (const auto& [f, content] : first) CHECK(testing::read_text(run / f) == content);

    const auto summary = json::parse(first["summary.json"]);
    CHECK(summary["interactions"] == 60 * 40);
    CHECK(summary["train_rows"].get<int>() + summary["test_rows"].get<int>() == 60 * 40);
    CHECK(summary["test_rows"] == 600);
    CHECK(first["train.csv"].rfind("userId,itemId,rating,timestamp\n", 0) == 0);

    const auto data = load_run_data(run);
    CHECK(data.catalog.size() == 200);
    CHECK(data.relevance.size() == summary["eval_users"].get<std::size_t>());
    for (const auto& [id, card] : data.catalog.items()) {
      CHECK(text::word_count(card.overview_short) <= 15);
      CHECK_FALSE(card.overview_short.empty());
    }
    for (const auto& [user, set] : data.relevance) CHECK(set.relevant.size() <= 10);
  }

  TEST_CASE("missing inputs") {
    testing::TempDir dir;
    auto c = corpus_config(dir.path());
    c.ratings = dir / "nope.csv";
    std::ostringstream out;
    CHECK(code_of([&] { cmd_ingest(c, out); }) == ErrorCode::MissingFile);
    CHECK(code_of([&] { load_run_data(dir / "empty"); }) == ErrorCode::MissingFile);
  }
}

TEST_SUITE("sample_users") {
  TEST_CASE("seeded subset in id order") {
    std::map<UserId, RelevanceSet> rel;
    for (int u = 0; u < 50; ++u) rel[UserId(std::to_string(u))] = {UserId(std::to_string(u)), {}};
    const auto a = sample_users(rel, 10, 1, "eval");
    CHECK(a.size() == 10);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a == sample_users(rel, 10, 1, "eval"));
    CHECK(a != sample_users(rel, 10, 2, "eval"));
    CHECK(a != sample_users(rel, 10, 1, "dataset"));
    CHECK(sample_users(rel, 100, 1, "eval").size() == 50);
  }
}

TEST_SUITE("run") {
  TEST_CASE("report.json is byte-identical across repeats and worker counts") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.modes = {RankerMode::ZeroShot, RankerMode::Trained};
    c.script = ScriptKind::Oracle;
    c.fidelity = 0.8;
    std::ostringstream out;
    REQUIRE(cmd_run(c, out) == kExitOk);
    const auto first = testing::read_text(c.run_dir / "report.json");
    const auto traces = testing::read_text(c.run_dir / "traces.jsonl");
    c.workers = 4;
    REQUIRE(cmd_run(c, out) == kExitOk);
    CHECK(testing::read_text(c.run_dir / "report.json") == first);
    CHECK(testing::read_text(c.run_dir / "traces.jsonl") == traces);

    c.seed = 43;
    REQUIRE(cmd_run(c, out) == kExitOk);
    CHECK(testing::read_text(c.run_dir / "report.json") != first);

    const auto report = json::parse(first);
    CHECK(report["sampled_users"] == 40);
    CHECK(report["evaluated_users"] == 40);
    CHECK(report["rankers"].contains("zero-shot"));
    CHECK(report["rankers"].contains("trained"));
    CHECK(line_count(traces) == 80);
    CHECK(json::parse(text::split(traces, '\n')[0]).contains("mode"));
    CHECK(traces.rfind("{\"user\":", 0) == 0);
  }

  TEST_CASE("none ranker equals metrics of the raw slate order") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.modes = {};
    std::ostringstream out;
    REQUIRE(cmd_run(c, out) == kExitOk);
    const auto report = json::parse(testing::read_text(c.run_dir / "report.json"));
    CHECK(report["rankers"].size() == 1);
    const auto slates = slates_from_jsonl(testing::read_text(c.run_dir / "slates.jsonl"));
    REQUIRE(slates.size() == 40);
    const auto data = load_run_data(c.run_dir);
    RankingsByUser raw;
    for (const auto& s : slates) raw[s.user] = s.items;
    for (const auto& r : evaluate_run(raw, data.relevance, c.cutoffs)) {
      const auto& cell = ranker_metric(report, "none", std::string(to_string(r.metric)), r.n);
      CHECK(cell["mean"].get<double>() == doctest::Approx(r.mean).epsilon(1e-12));
      for (const auto& [user, v] : r.per_user) CHECK(cell["per_user"][user.str()].get<double>() == v);
    }
  }

  TEST_CASE("a perfect oracle with enough injected positives reaches NDCG@10 = 1") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.inject_positives = 10;
    c.script = ScriptKind::Oracle;
    c.fidelity = 1.0;
    std::ostringstream out;
    REQUIRE(cmd_run(c, out) == kExitOk);
    const auto report = json::parse(testing::read_text(c.run_dir / "report.json"));
    const auto& cell = ranker_metric(report, "trained", "NDCG", 10);
    CHECK(std::abs(cell["mean"].get<double>() - 1.0) <= 1e-9);
    for (const auto& [user, v] : cell["per_user"].items()) CHECK(std::abs(v.get<double>() - 1.0) <= 1e-9);
    CHECK(out.str().find("**") != std::string::npos);
    CHECK(testing::read_text(c.run_dir / "report.csv").rfind("metric,n,non_ranker,zero_shot,sft_dpo,", 0) == 0);
  }

  TEST_CASE("generators") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.sample_count = 10;
    c.mf.epochs = 5;
    std::ostringstream out;
    for (const auto g : {SlateSource::Random, SlateSource::MatrixFactorization, SlateSource::ItemKnn}) {
      c.generator = g;
      CHECK(cmd_run(c, out) == kExitOk);
      for (const auto& s : slates_from_jsonl(testing::read_text(c.run_dir / "slates.jsonl"))) {
        CHECK(s.items.size() == c.slate_size);
        CHECK(s.source == g);
      }
    }
  }

  TEST_CASE("unparseable answers fall back or skip users") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.sample_count = 5;
    std::ostringstream out;
    REQUIRE(cmd_export_slates(c, dir / "slates.jsonl", out) == kExitOk);
    const auto slates = slates_from_jsonl(testing::read_text(dir / "slates.jsonl"));
    REQUIRE(slates.size() == 5);

    // One user gets a proper answer; everyone else gets chatter.
    json rule{{"prompt_contains", "User: " + slates[0].user.str() + "\n"}};
    std::string answer;
    for (std::size_t i = 0; i < slates[0].items.size(); ++i) {
      answer += "Rank " + std::to_string(i + 1) + ": " + slates[0].items[i].str() + " - fits\n";
    }
    rule["response"] = answer;
    testing::write_text(dir / "fixture.jsonl", rule.dump() + "\n" + json{{"default", "I like them all."}}.dump() + "\n");
    c.script = ScriptKind::Fixture;
    c.fixture = dir / "fixture.jsonl";

    REQUIRE(cmd_run(c, out) == kExitOk);
    auto report = json::parse(testing::read_text(c.run_dir / "report.json"));
    CHECK(report["fell_back"] == 4);

    c.parse_mode = ParseMode::Strict;
    std::ostringstream strict_out;
    CHECK(cmd_run(c, strict_out) == kExitPartial);
    report = json::parse(testing::read_text(c.run_dir / "report.json"));
    CHECK(report["evaluated_users"] == 1);
    CHECK(report["skipped"].size() == 4);
    CHECK(strict_out.str().find("skipped users: 4") != std::string::npos);
  }
}

TEST_SUITE("slates import and export") {
  TEST_CASE("exported slates drive an external run") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.sample_count = 8;
    std::ostringstream out;
    REQUIRE(cmd_export_slates(c, dir / "s.jsonl", out) == kExitOk);
    REQUIRE(cmd_import_slates(c, dir / "s.jsonl", out) == kExitOk);
    c.generator = SlateSource::External;
    REQUIRE(cmd_run(c, out) == kExitOk);
    const auto a = slates_from_jsonl(testing::read_text(dir / "s.jsonl"));
    const auto b = slates_from_jsonl(testing::read_text(c.run_dir / "slates.jsonl"));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].items == b[i].items);
  }

  TEST_CASE("invalid imports") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.sample_count = 2;
    std::ostringstream out;
    REQUIRE(cmd_export_slates(c, dir / "s.jsonl", out) == kExitOk);
    auto slates = slates_from_jsonl(testing::read_text(dir / "s.jsonl"));

    auto dup = slates;
    dup.push_back(slates[0]);
    testing::write_text(dir / "dup.jsonl", slates_to_jsonl(dup));
    CHECK(code_of([&] { cmd_import_slates(c, dir / "dup.jsonl", out); }) == ErrorCode::MalformedRow);

    auto unknown = slates;
    unknown[0].items[0] = ItemId("99999");
    testing::write_text(dir / "unknown.jsonl", slates_to_jsonl(unknown));
    CHECK(code_of([&] { cmd_import_slates(c, dir / "unknown.jsonl", out); }) == ErrorCode::UnknownItem);

    auto short_slate = slates;
    short_slate[0].items.pop_back();
    testing::write_text(dir / "short.jsonl", slates_to_jsonl(short_slate));
    CHECK(code_of([&] { cmd_import_slates(c, dir / "short.jsonl", out); }) == ErrorCode::InvalidArgument);
    CHECK_FALSE(std::filesystem::exists(c.run_dir / "slates.external.jsonl"));
  }
}

TEST_SUITE("build-dataset") {
  TEST_CASE("one pair per sampled user") {
    testing::TempDir dir;
    auto c = ingested(dir.path(), {.users = 120});
    c.dataset_users = 100;
    std::ostringstream out;
    REQUIRE(cmd_build_dataset(c, out) == kExitOk);
    const auto dpo = testing::read_text(c.run_dir / "dataset" / "dpo.jsonl");
    const auto sft = testing::read_text(c.run_dir / "dataset" / "sft.jsonl");
    CHECK(line_count(dpo) == 100);
    CHECK(line_count(sft) == 100);
    CHECK(std::filesystem::exists(c.run_dir / "dataset" / "manifest.json"));
    REQUIRE(cmd_build_dataset(c, out) == kExitOk);
    CHECK(testing::read_text(c.run_dir / "dataset" / "dpo.jsonl") == dpo);

    c.pairs_per_sample = 3;
    c.dataset_users = 10;
    REQUIRE(cmd_build_dataset(c, out) == kExitOk);
    CHECK(line_count(testing::read_text(c.run_dir / "dataset" / "dpo.jsonl")) == 30);
  }

  TEST_CASE("rankings too short for a pair are rejected up front") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.ranking_size = 1;
    c.negatives = 0;
    std::ostringstream out;
    CHECK(code_of([&] { cmd_build_dataset(c, out); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("online generation through the echo backend") {
    testing::TempDir dir;
    auto c = ingested(dir.path());
    c.dataset_users = 5;
    c.offline = false;
    c.regenerate_rejected = true;
    std::ostringstream out;
    REQUIRE(cmd_build_dataset(c, out) == kExitOk);
    const auto pairs = dpo_from_jsonl(testing::read_text(c.run_dir / "dataset" / "dpo.jsonl"));
    REQUIRE(pairs.size() == 5);
    for (const auto& p : pairs) {
      CHECK(p.chosen.find("Listed at position") != std::string::npos);
      CHECK(p.rejected.find("Listed at position 1.") != std::string::npos);
      CHECK(p.chosen != p.rejected);
    }
  }
}

TEST_SUITE("human-eval") {
  TEST_CASE("identical paired scores") {
    testing::TempDir dir;
    testing::write_text(dir / "a.txt", "4\n3\n5\n");
    std::ostringstream out;
    CHECK(cmd_human_eval(dir / "a.txt", dir / "a.txt", {.paired = true}, out) == kExitOk);
    CHECK(out.str().find("no difference (zero variance)") != std::string::npos);
  }

  TEST_CASE("a clear gap is significant") {
    testing::TempDir dir;
    testing::write_text(dir / "a.txt", "4\n5\n4\n5\n4\n4\n5\n4\n4\n4\n");
    testing::write_text(dir / "b.txt", "4\n3\n4\n3\n4\n4\n3\n4\n3\n4\n");
    std::ostringstream out;
    CHECK(cmd_human_eval(dir / "a.txt", dir / "b.txt", {.equal_variance = true}, out) == kExitOk);
    CHECK(out.str().find("A: n=10 mean=4.3") != std::string::npos);
    CHECK(out.str().find("B: n=10 mean=3.6") != std::string::npos);
    CHECK(out.str().find("test: Student t-test") != std::string::npos);
    CHECK(out.str().find("p = 0.0058**") != std::string::npos);
    std::ostringstream welch;
    cmd_human_eval(dir / "a.txt", dir / "b.txt", {}, welch);
    CHECK(welch.str().find("test: Welch t-test") != std::string::npos);
  }

  TEST_CASE("input errors") {
    testing::TempDir dir;
    testing::write_text(dir / "a.txt", "4\n5\n\n3\n");
    testing::write_text(dir / "b.txt", "4\n5\n");
    testing::write_text(dir / "bad.txt", "4\n6\n");
    testing::write_text(dir / "word.txt", "4\ngood\n");
    CHECK(read_likert_scores(dir / "a.txt") == std::vector<double>{4, 5, 3});
    std::ostringstream out;
    CHECK(code_of([&] { cmd_human_eval(dir / "a.txt", dir / "b.txt", {.paired = true}, out); }) ==
          ErrorCode::LengthMismatch);
    CHECK(code_of([&] { read_likert_scores(dir / "bad.txt"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([&] { read_likert_scores(dir / "word.txt"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([&] { read_likert_scores(dir / "none.txt"); }) == ErrorCode::MissingFile);
  }
}
