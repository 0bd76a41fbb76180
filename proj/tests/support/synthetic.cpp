#include "support/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "llmrerank/random.hpp"
#include "support/temp_dir.hpp"

namespace testing {

using namespace llmrerank;

namespace {

const char* const kGenres[] = {"Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi", "Animation", "Thriller"};
const char* const kLanguages[] = {"en", "fr", "ja", "es"};
const char* const kWords[] = {"a",      "young", "pilot", "finds",  "an",     "old",    "map",     "that",
                              "leads",  "to",    "the",   "edge",   "of",     "a",      "frozen",  "city",
                              "where",  "time",  "runs",  "backwards", "and", "friends", "become", "rivals"};

std::string overview_for(Rng& rng) {
  std::string out;
  for (int w = 0; w < 20; ++w) {
    if (w) out += ' ';
    out += kWords[rng.uniform_index(std::size(kWords))];
  }
  return out + ".";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Corpus make_corpus(const CorpusShape& shape) {
  Corpus corpus;
  Rng rng(derive_seed(shape.seed, "corpus"));
  for (std::size_t i = 1; i <= shape.items; ++i) {
    ItemCard card;
    card.id = ItemId(std::to_string(i));
    card.title = "Movie " + std::to_string(i) + (i % 7 == 0 ? ", Part II" : "");
    const auto g = rng.uniform_index(std::size(kGenres));
    card.genres = {kGenres[g], kGenres[(g + 1 + rng.uniform_index(3)) % std::size(kGenres)]};
    card.language = kLanguages[rng.uniform_index(std::size(kLanguages))];
    card.overview = overview_for(rng);
    corpus.catalog.insert(std::move(card));
  }

  std::vector<std::size_t> ids(shape.items);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i + 1;
  const double liked[] = {4.0, 4.5, 5.0};
  const double other[] = {1.0, 2.0, 2.5, 3.0, 3.5};
  for (std::size_t u = 1; u <= shape.users; ++u) {
    rng.shuffle(std::span(ids));
    for (std::size_t k = 0; k < std::min(shape.per_user, ids.size()); ++k) {
      const double r = k < shape.liked ? liked[rng.uniform_index(3)] : other[rng.uniform_index(5)];
      const auto ts = static_cast<std::int64_t>(1'000'000'000 + rng.uniform_index(100'000'000));
      corpus.interactions.push_back({UserId(std::to_string(u)), ItemId(std::to_string(ids[k])), r, ts});
    }
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::string ratings = "userId,movieId,rating,timestamp\n";
  for (const auto& r : corpus.interactions) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", r.rating);
    ratings += r.user.str() + "," + r.item.str() + "," + buf + "," + std::to_string(r.timestamp) + "\n";
  }
  write_text(dir / "ratings.csv", ratings);

  std::string items = "movieId,title,genres,language,overview\n";
  for (const auto& [id, card] : corpus.catalog.items()) {
    std::string genres;
    for (const auto& g : card.genres) genres += (genres.empty() ? "" : "|") + g;
    items += id.str() + "," + csv_field(card.title) + "," + genres + "," + card.language + "," +
             csv_field(card.overview) + "\n";
  }
  write_text(dir / "items.csv", items);
}

Catalog numbered_catalog(std::size_t n) {
  Catalog catalog;
  for (std::size_t i = 1; i <= n; ++i) {
    ItemCard card;
    card.id = ItemId(std::to_string(i));
    card.title = "Title " + std::to_string(i);
    card.genres = {i % 2 ? "Drama" : "Comedy"};
    card.language = "en";
    card.overview_short = "Item number " + std::to_string(i) + ".";
    catalog.insert(std::move(card));
  }
  return catalog;
}

std::vector<ItemId> item_ids(std::initializer_list<const char*> ids) {
  std::vector<ItemId> out;
  for (const auto* id : ids) out.emplace_back(id);
  return out;
}

}  // namespace testing
