#include "llmrerank/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "io.hpp"
#include "llmrerank/error.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

std::optional<double> parse_double(std::string_view s) {
  s = text::trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = text::trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// Empty optional with a reason filled in on failure.
std::optional<Interaction> to_interaction(const csv::Record& rec, std::string& why) {
  if (rec.fields.size() != 4) {
    why = "expected 4 fields, got " + std::to_string(rec.fields.size());
    return std::nullopt;
  }
  const auto user = text::trim(rec.fields[0]);
  const auto item = text::trim(rec.fields[1]);
  if (user.empty() || item.empty()) {
    why = "empty user or item id";
    return std::nullopt;
  }
  const auto rating = parse_double(rec.fields[2]);
  if (!rating || !std::isfinite(*rating) || *rating < kMinRating || *rating > kMaxRating) {
    why = "rating '" + rec.fields[2] + "' outside [0.5, 5.0]";
    return std::nullopt;
  }
  const auto ts = parse_int(rec.fields[3]);
  if (!ts || *ts < 0) {
    why = "timestamp '" + rec.fields[3] + "' is not a non-negative integer";
    return std::nullopt;
  }
  return Interaction{UserId(std::string(user)), ItemId(std::string(item)), *rating, *ts};
}

bool history_order(const HistoryEntry& a, const HistoryEntry& b) {
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
  return a.item < b.item;
}

bool recency_order(const Interaction& a, const Interaction& b) {
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
  return a.item < b.item;
}

std::vector<std::string> split_genres(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& g : text::split(s, '|')) {
    const auto t = text::trim(g);
    if (!t.empty() && t != "(no genres listed)") out.emplace_back(t);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Catalog

void Catalog::insert(ItemCard card) {
  const ItemId id = card.id;
  if (!items_.emplace(id, std::move(card)).second) {
    fail(ErrorCode::InvalidArgument, "duplicate item id " + id.str());
  }
}

const ItemCard* Catalog::find(const ItemId& id) const {
  const auto it = items_.find(id);
  return it == items_.end() ? nullptr : &it->second;
}

const ItemCard& Catalog::at(const ItemId& id) const {
  if (const auto* card = find(id)) return *card;
  fail(ErrorCode::UnknownItem, "item " + id.str() + " not in catalog");
}

ItemCard& Catalog::at_mut(const ItemId& id) {
  const auto it = items_.find(id);
  if (it == items_.end()) fail(ErrorCode::UnknownItem, "item " + id.str() + " not in catalog");
  return it->second;
}

// ---------------------------------------------------------------------------
// Loading

LoadedInteractions parse_interactions(std::string_view content, const RatingsFormat& format) {
  LoadedInteractions out;
  const auto records = csv::read_records(content, format.delimiter);
  std::size_t first = 0;
  if (!records.empty()) {
    bool header = false;
    if (format.has_header) {
      header = *format.has_header;
    } else {
      const auto& f = records.front().fields;
      header = f.size() >= 3 && !parse_double(f[2]).has_value();
    }
    if (header) first = 1;
  }
  out.rows.reserve(records.size() - first);
  for (std::size_t i = first; i < records.size(); ++i) {
    std::string why;
    if (auto row = to_interaction(records[i], why)) {
      out.rows.push_back(std::move(*row));
    } else if (format.lenient) {
      ++out.skipped;
    } else {
      fail(ErrorCode::MalformedRow, "line " + std::to_string(records[i].line) + ": " + why, records[i].line);
    }
  }
  return out;
}

LoadedInteractions load_interactions(const std::filesystem::path& path, const RatingsFormat& format) {
  return parse_interactions(io::read_file(path), format);
}

Catalog parse_catalog_csv(std::string_view content) {
  Catalog catalog;
  const auto records = csv::read_records(content);
  if (records.empty()) return catalog;

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < records.front().fields.size(); ++i) {
    auto name = text::to_lower(text::trim(records.front().fields[i]));
    if (name == "movieid" || name == "itemid" || name == "item_id") name = "id";
    if (name == "lang" || name == "original_language") name = "language";
    column.emplace(name, i);
  }
  if (!column.count("id") || !column.count("title")) {
    fail(ErrorCode::MalformedRow, "items header must name id and title columns", records.front().line);
  }
  auto get = [&](const csv::Record& r, const char* name) -> std::string {
    const auto it = column.find(name);
    if (it == column.end() || it->second >= r.fields.size()) return {};
    return std::string(text::trim(r.fields[it->second]));
  };
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto id = get(r, "id");
    if (id.empty()) fail(ErrorCode::MalformedRow, "line " + std::to_string(r.line) + ": empty item id", r.line);
    ItemCard card;
    card.id = ItemId(id);
    card.title = text::single_line(get(r, "title"));
    card.genres = split_genres(get(r, "genres"));
    card.language = get(r, "language");
    card.overview = text::single_line(get(r, "overview"));
    catalog.insert(std::move(card));
  }
  return catalog;
}

Catalog parse_catalog_jsonl(std::string_view content) {
  Catalog catalog;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("id")) {
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": object with an id expected", line_no);
    }
    ItemCard card;
    card.id = ItemId(j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump());
    card.title = text::single_line(j.value("title", ""));
    if (j.contains("genres")) {
      const auto& g = j["genres"];
      if (g.is_array()) {
        for (const auto& e : g) card.genres.push_back(e.get<std::string>());
      } else if (g.is_string()) {
        card.genres = split_genres(g.get<std::string>());
      }
    }
    card.language = j.value("language", "");
    card.overview = text::single_line(j.value("overview", ""));
    card.overview_short = text::single_line(j.value("overview_short", ""));
    if (text::word_count(card.overview_short) > kOverviewWordLimit) {
      card.overview_short = text::first_words(card.overview_short, kOverviewWordLimit);
    }
    catalog.insert(std::move(card));
  }
  return catalog;
}

Catalog load_catalog(const std::filesystem::path& path) {
  const auto content = io::read_file(path);
  const auto ext = path.extension().string();
  bool jsonl = ext == ".jsonl" || ext == ".json";
  if (ext != ".csv" && !jsonl) {
    const auto t = text::trim(content);
    jsonl = !t.empty() && t.front() == '{';
  }
  Catalog catalog = jsonl ? parse_catalog_jsonl(content) : parse_catalog_csv(content);
  fill_short_overviews(catalog);
  return catalog;
}

void fill_short_overviews(Catalog& catalog) {
  for (const auto& [id, card] : catalog.items()) {
    auto& c = catalog.at_mut(id);
    if (c.overview_short.empty() && !c.overview.empty() && text::word_count(c.overview) <= kOverviewWordLimit) {
      c.overview_short = std::string(text::trim(c.overview));
    }
  }
}

std::string build_item_description(const ItemCard& card) {
  const auto title = text::trim(card.title);
  if (title.empty()) fail(ErrorCode::EmptyTitle, "item " + card.id.str() + " has no title");

  std::string genres;
  for (const auto& g : card.genres) {
    if (!genres.empty()) genres += '|';
    genres += g;
  }
  auto or_dash = [](std::string_view s) { return s.empty() ? std::string("-") : text::single_line(s); };

  std::string out = "[" + card.id.str() + "] ";
  out += text::single_line(title);
  out += " | " + or_dash(genres);
  out += " | " + or_dash(text::trim(card.language));
  out += " | " + or_dash(text::trim(card.overview_short));
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::map<UserId, std::vector<Interaction>> group_by_user(const std::vector<Interaction>& rows) {
  std::map<UserId, std::vector<Interaction>> out;
  for (const auto& r : rows) out[r.user].push_back(r);
  return out;
}

Split split_leave_n_out(const std::vector<Interaction>& interactions, const SplitOptions& options) {
  require(options.n_test >= 1, "n_test must be >= 1");
  require(options.min_history >= 1, "min_history must be >= 1");

  Split split;
  std::map<UserId, std::set<ItemId>> held_out;
  for (auto& [user, rows] : group_by_user(interactions)) {
    std::vector<Interaction> qualifying;
    for (const auto& r : rows) {
      if (r.rating >= options.relevance_threshold) qualifying.push_back(r);
    }
    std::sort(qualifying.begin(), qualifying.end(), recency_order);

    // Distinct items only; a re-rated item counts once.
    std::vector<ItemId> distinct;
    std::set<ItemId> seen;
    for (const auto& r : qualifying) {
      if (seen.insert(r.item).second) distinct.push_back(r.item);
    }
    if (distinct.size() < options.min_history + options.n_test) {
      ++split.filtered_users;
      continue;
    }
    RelevanceSet rel{user, {}};
    rel.relevant.insert(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(options.n_test));
    held_out[user] = rel.relevant;
    split.relevance.emplace(user, std::move(rel));
  }

  for (const auto& r : interactions) {
    const auto it = held_out.find(r.user);
    if (it != held_out.end() && it->second.count(r.item)) {
      split.test.push_back(r);
    } else {
      split.train.push_back(r);
    }
  }
  return split;
}

History sample_history(const UserId& user, const std::vector<Interaction>& rows, const HistorySampling& sampling) {
  if (rows.empty()) fail(ErrorCode::NoHistory, "user " + user.str() + " has no training interactions");

  std::vector<HistoryEntry> entries;
  entries.reserve(rows.size());
  for (const auto& r : rows) entries.push_back({r.item, r.rating, r.timestamp});
  std::sort(entries.begin(), entries.end(), history_order);

  if (entries.size() > sampling.limit) {
    if (sampling.random_seed) {
      Rng rng(derive_seed(*sampling.random_seed, "history:" + user.str()));
      rng.shuffle(std::span(entries));
      entries.resize(sampling.limit);
      std::sort(entries.begin(), entries.end(), history_order);
    } else {
      entries.resize(sampling.limit);
    }
  }
  return History{user, std::move(entries)};
}

}  // namespace llmrerank
