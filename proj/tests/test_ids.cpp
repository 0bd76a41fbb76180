#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "llmrerank/error.hpp"
#include "llmrerank/ids.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

using namespace llmrerank;

TEST_CASE("numeric ids order numerically and before other ids") {
  std::vector<ItemId> ids{ItemId("42"), ItemId("b"), ItemId("7"), ItemId("a10"), ItemId("007"), ItemId("100")};
  std::sort(ids.begin(), ids.end());
  std::vector<std::string> got;
  for (const auto& id : ids) got.push_back(id.str());
  CHECK(got == std::vector<std::string>{"007", "7", "42", "100", "a10", "b"});
  CHECK(ItemId("7") != ItemId("007"));
}

TEST_CASE("empty ids are rejected") {
  CHECK_THROWS_AS(UserId(""), Error);
  try {
    ItemId bad{""};
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("derived seeds are stable and label dependent") {
  CHECK(derive_seed(42, "user:1") == derive_seed(42, "user:1"));
  CHECK(derive_seed(42, "user:1") != derive_seed(42, "user:2"));
  CHECK(derive_seed(42, "user:1") != derive_seed(43, "user:1"));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("uniform_index stays in range and covers every value") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.uniform_index(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have the requested moments") {
  Rng rng(11);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 0.5);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.01));
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("text helpers") {
  CHECK(text::trim("  a b \t") == "a b");
  CHECK(text::word_count("  one two\tthree \n") == 3);
  CHECK(text::first_words("a b c d", 2) == "a b");
  CHECK(text::normalize_title("The Matrix: Reloaded!") == "the matrix reloaded");
  CHECK(text::single_line("a\nb\tc") == "a b c");
  CHECK(text::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
  CHECK(text::iequals_prefix("RANK 1", "rank"));
}
