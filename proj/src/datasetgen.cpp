#include "llmrerank/datasetgen.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "io.hpp"
#include "llmrerank/error.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

constexpr std::string_view kSummarySystem = "You write very short, spoiler-free item summaries.";

constexpr std::string_view kReasonSystem =
    "You explain recommendation rankings. For the given ranking, write one short reason per item explaining "
    "its position for this user. Keep the given order and use every item once.\n"
    "Output exactly one line per item in the form:\n"
    "Rank <k>: <item id> - <reason>";

Slate ranking_slate(const UserId& user, const std::vector<ItemId>& ranking) {
  return Slate{user, ranking, SlateSource::External};
}

std::string clean_reason(std::string_view reason) {
  const auto flat = text::single_line(reason);
  auto r = text::trim(flat);
  return r.empty() ? std::string("No reason given.") : std::string(r);
}

/// Reasons in `ranking` order, or nullopt if the backend reordered items.
std::optional<std::vector<std::string>> request_reasons(ChatBackend& backend, const History& history,
                                                        const std::vector<ItemId>& ranking, const Catalog& catalog) {
  const auto prompt = build_reason_prompt(history, ranking, catalog);
  ChatRequest req;
  req.system_prompt = prompt.system;
  req.user_prompt = prompt.user;
  req.temperature = kDatasetTemperature;
  const auto response = backend.complete(req);
  const auto parsed = parse_ranking(response.text, ranking_slate(history.user, ranking), &catalog, ParseMode::Lenient);
  if (parsed.order() != ranking) return std::nullopt;
  std::vector<std::string> reasons;
  for (const auto& r : parsed.ranked) reasons.push_back(clean_reason(r.reason));
  return reasons;
}

std::string render(const std::vector<ItemId>& ranking, const std::vector<std::string>& reasons) {
  std::vector<RankedItem> ranked;
  for (std::size_t i = 0; i < ranking.size(); ++i) ranked.push_back({ranking[i], i + 1, reasons[i]});
  return format_ranking(ranked);
}

std::vector<std::size_t> non_identity_permutation(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  for (;;) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] != i) return perm;
    }
  }
}

struct ParsedCompletion {
  std::vector<ItemId> items;
  std::vector<std::string> reasons;
};

ParsedCompletion parse_completion(const SftSample& positive) {
  require(positive.ranking.size() >= 2, "a preference pair needs a ranking of at least 2 items");
  const auto parsed =
      parse_ranking(positive.completion, ranking_slate(positive.user, positive.ranking), nullptr, ParseMode::Strict);
  ParsedCompletion out;
  for (const auto& r : parsed.ranked) {
    out.items.push_back(r.item);
    out.reasons.push_back(r.reason);
  }
  require(out.items == positive.ranking, "positive completion does not encode its ranking");
  return out;
}

std::vector<std::string> jsonl_lines(std::string_view content) {
  std::vector<std::string> out;
  for (auto& line : text::split(content, '\n')) {
    if (!text::trim(line).empty()) out.push_back(std::move(line));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Summaries

std::string summarize_overview(ChatBackend* backend, std::string_view full_overview) {
  const auto flat = text::single_line(full_overview);
  const auto overview = text::trim(flat);
  require(!overview.empty(), "cannot summarize an empty overview");
  if (text::word_count(overview) <= kOverviewWordLimit) return std::string(overview);
  if (backend == nullptr) return text::first_words(overview, kOverviewWordLimit);

  ChatRequest req;
  req.system_prompt = std::string(kSummarySystem);
  req.user_prompt = "Summarize the following overview in at most " + std::to_string(kOverviewWordLimit) +
                    " words. Reply with the summary only.\nOverview: " + std::string(overview);
  req.temperature = kDatasetTemperature;
  std::string summary;
  for (int attempt = 0; attempt < 2; ++attempt) {
    summary = text::single_line(backend->complete(req).text);
    if (text::word_count(summary) <= kOverviewWordLimit) return std::string(text::trim(summary));
  }
  return text::first_words(summary, kOverviewWordLimit);
}

std::size_t summarize_catalog(Catalog& catalog, ChatBackend* backend) {
  std::size_t calls = 0;
  for (const auto& [id, card] : catalog.items()) {
    if (!card.overview_short.empty() || text::trim(card.overview).empty()) continue;
    auto& c = catalog.at_mut(id);
    const bool needs_call = text::word_count(c.overview) > kOverviewWordLimit;
    c.overview_short = summarize_overview(backend, c.overview);
    if (needs_call && backend != nullptr) ++calls;
  }
  return calls;
}

// ---------------------------------------------------------------------------
// Samples

std::vector<ItemId> build_correct_ranking(const UserId& user, const std::vector<Interaction>& held_out_rows,
                                          const std::set<ItemId>& interacted, const Catalog& catalog,
                                          const RankingShape& shape, std::uint64_t seed) {
  require(shape.size >= 1, "ranking size must be >= 1");
  require(shape.negatives <= shape.size, "more negatives than ranking positions");

  auto rows = held_out_rows;
  std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
    if (a.rating != b.rating) return a.rating > b.rating;
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    return a.item < b.item;
  });
  std::vector<ItemId> ranking;
  std::set<ItemId> used;
  const std::size_t relevant_slots = shape.size - shape.negatives;
  for (const auto& r : rows) {
    if (ranking.size() >= relevant_slots) break;
    if (catalog.contains(r.item) && used.insert(r.item).second) ranking.push_back(r.item);
  }

  std::vector<ItemId> pool;
  for (const auto& [id, card] : catalog.items()) {
    if (!interacted.count(id) && !used.count(id)) pool.push_back(id);
  }
  Rng rng(derive_seed(seed, "negatives:" + user.str()));
  const std::size_t want = std::min(shape.size - ranking.size(), pool.size());
  for (std::size_t i = 0; i < want; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
    ranking.push_back(pool[i]);
  }
  return ranking;
}

Prompt build_reason_prompt(const History& history, const std::vector<ItemId>& ranking, const Catalog& catalog) {
  Prompt p;
  p.system = std::string(kReasonSystem);
  p.user = "User: " + history.user.str() + "\nUser history:\n";
  if (history.entries.empty()) p.user += "(none)\n";
  for (const auto& e : history.entries) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", e.rating);
    p.user += build_item_description(catalog.at(e.item)) + " | rated " + buf + "\n";
  }
  p.user += "Ranking:\n";
  for (const auto& id : ranking) p.user += build_item_description(catalog.at(id)) + "\n";
  p.user += "\nExplain this ranking.";
  return p;
}

std::string offline_reason(const History& history, const ItemCard& card, const Catalog& catalog) {
  std::map<std::string, std::size_t> liked;
  for (const auto& e : history.entries) {
    if (e.rating < kDefaultRelevanceThreshold) continue;
    if (const auto* h = catalog.find(e.item)) {
      for (const auto& g : h->genres) ++liked[g];
    }
  }
  std::vector<std::string> shared;
  for (const auto& g : card.genres) {
    if (liked.count(g)) shared.push_back(g);
  }
  if (shared.empty()) return "Outside the genres this user usually rates highly.";
  std::string joined;
  for (const auto& g : shared) {
    if (!joined.empty()) joined += ", ";
    joined += g;
  }
  return "Shares " + joined + " with titles this user rated highly.";
}

SftSample make_positive_sample(ChatBackend* backend, const History& history,
                               const std::vector<ItemId>& correct_ranking, const Catalog& catalog,
                               std::uint64_t seed) {
  require(!correct_ranking.empty(), "correct ranking is empty");
  for (const auto& id : correct_ranking) catalog.at(id);

  SftSample sample;
  sample.user = history.user;
  sample.ranking = correct_ranking;
  // The model sees candidates in a shuffled order, as at inference time.
  const auto shown = bootstrap_shuffles(ranking_slate(history.user, correct_ranking), 1, seed).front();
  const auto prompt = build_prompt(history, shown, catalog, RankerMode::Trained);
  sample.prompt = prompt.system + "\n\n" + prompt.user;

  std::vector<std::string> reasons;
  if (backend == nullptr) {
    for (const auto& id : correct_ranking) reasons.push_back(offline_reason(history, catalog.at(id), catalog));
  } else {
    auto generated = request_reasons(*backend, history, correct_ranking, catalog);
    if (!generated) generated = request_reasons(*backend, history, correct_ranking, catalog);
    if (!generated) {
      fail(ErrorCode::GenerationOrderDrift, "backend reordered the ranking for user " + history.user.str() + " twice");
    }
    reasons = std::move(*generated);
  }
  sample.completion = render(correct_ranking, reasons);
  return sample;
}

DpoPair make_dpo_pair(const SftSample& positive, std::uint64_t seed) {
  const auto chosen = parse_completion(positive);
  const auto perm = non_identity_permutation(chosen.items.size(), derive_seed(seed, "dpo:" + positive.user.str()));
  std::vector<ItemId> items;
  std::vector<std::string> reasons;
  for (const auto p : perm) {
    items.push_back(chosen.items[p]);
    reasons.push_back(chosen.reasons[p]);
  }
  return DpoPair{positive.user, positive.prompt, positive.completion, render(items, reasons)};
}

DpoPair make_dpo_pair(const SftSample& positive, std::uint64_t seed, ChatBackend& backend, const History& history,
                      const Catalog& catalog) {
  auto pair = make_dpo_pair(positive, seed);
  const auto rejected = parse_ranking(pair.rejected, ranking_slate(positive.user, positive.ranking), nullptr,
                                      ParseMode::Strict)
                            .order();
  auto regenerated = request_reasons(backend, history, rejected, catalog);
  if (!regenerated) regenerated = request_reasons(backend, history, rejected, catalog);
  if (regenerated) pair.rejected = render(rejected, *regenerated);
  return pair;
}

// ---------------------------------------------------------------------------
// Files

std::string sft_to_jsonl(const std::vector<SftSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["prompt"] = s.prompt;
    j["completion"] = s.completion;
    out += j.dump() + "\n";
  }
  return out;
}

std::string dpo_to_jsonl(const std::vector<DpoPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["prompt"] = p.prompt;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<SftSample> sft_from_jsonl(std::string_view content) {
  std::vector<SftSample> out;
  for (const auto& line : jsonl_lines(content)) {
    const auto j = nlohmann::json::parse(line);
    SftSample s;
    s.prompt = j.at("prompt").get<std::string>();
    s.completion = j.at("completion").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DpoPair> dpo_from_jsonl(std::string_view content) {
  std::vector<DpoPair> out;
  for (const auto& line : jsonl_lines(content)) {
    const auto j = nlohmann::json::parse(line);
    DpoPair p;
    p.prompt = j.at("prompt").get<std::string>();
    p.chosen = j.at("chosen").get<std::string>();
    p.rejected = j.at("rejected").get<std::string>();
    out.push_back(std::move(p));
  }
  return out;
}

TrainingManifest write_training_files(const std::vector<SftSample>& samples, const std::vector<DpoPair>& pairs,
                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto sft = sft_to_jsonl(samples);
  const auto dpo = dpo_to_jsonl(pairs);
  io::write_file_atomic(out_dir / "sft.jsonl", sft);
  io::write_file_atomic(out_dir / "dpo.jsonl", dpo);

  TrainingManifest manifest{{"sft.jsonl", samples.size(), io::sha256_hex(sft)},
                            {"dpo.jsonl", pairs.size(), io::sha256_hex(dpo)}};
  nlohmann::ordered_json j;
  for (const auto* e : {&manifest.sft, &manifest.dpo}) {
    j["files"].push_back({{"file", e->file}, {"count", e->count}, {"sha256", e->sha256}});
  }
  io::write_file_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

}  // namespace llmrerank
