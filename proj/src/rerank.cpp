#include "llmrerank/rerank.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "llmrerank/error.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

constexpr std::string_view kZeroShotSystem =
    "You are a recommendation assistant. Given a user's rating history and a list of candidate items, "
    "re-rank the candidates from most to least likely to suit the user.\n"
    "Answer with exactly one line per candidate, using every candidate once, in the form:\n"
    "Rank <k>: <item id> - <reason>\n"
    "Use the bracketed item id. Do not write anything else.";

constexpr std::string_view kTrainedSystem =
    "You are a trained re-ranker for personalized recommendations. Rank every candidate for the user and "
    "justify each position from the user's history.\n"
    "Output exactly one line per candidate in the form:\n"
    "Rank <k>: <item id> - <reason>";

std::string format_rating(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", r);
  return buf;
}

std::string_view strip_decoration(std::string_view token) {
  token = text::trim(token);
  // Markdown emphasis and quotes around the item token.
  while (!token.empty() && (token.front() == '*' || token.front() == '"' || token.front() == '\'' ||
                            token.front() == '`')) {
    token.remove_prefix(1);
  }
  while (!token.empty() && (token.back() == '*' || token.back() == '"' || token.back() == '\'' ||
                            token.back() == '`')) {
    token.remove_suffix(1);
  }
  return text::trim(token);
}

class ItemResolver {
 public:
  ItemResolver(const Slate& slate, const Catalog* catalog) {
    for (const auto& id : slate.items) {
      by_id_.emplace(id.str(), id);
      if (catalog != nullptr) {
        if (const auto* card = catalog->find(id)) {
          const auto norm = text::normalize_title(card->title);
          if (!norm.empty()) by_title_.emplace(norm, id);
        }
      }
    }
  }

  std::optional<ItemId> resolve(std::string_view raw_token) const {
    const auto token = strip_decoration(raw_token);
    if (token.empty()) return std::nullopt;
    if (token.front() == '[') {
      const auto close = token.find(']');
      if (close != std::string_view::npos) {
        if (auto hit = lookup_id(text::trim(token.substr(1, close - 1)))) return hit;
        if (auto hit = lookup_title(token.substr(close + 1))) return hit;
      }
    }
    if (auto hit = lookup_id(token)) return hit;
    return lookup_title(token);
  }

 private:
  std::optional<ItemId> lookup_id(std::string_view s) const {
    const auto it = by_id_.find(std::string(s));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<ItemId> lookup_title(std::string_view s) const {
    const auto norm = text::normalize_title(s);
    if (norm.empty()) return std::nullopt;
    const auto it = by_title_.find(norm);
    if (it == by_title_.end()) return std::nullopt;
    return it->second;
  }

  std::map<std::string, ItemId> by_id_;
  std::map<std::string, ItemId> by_title_;
};

/// `rank <digits> :` prefix; returns the remainder after the colon.
std::optional<std::string_view> match_rank_prefix(std::string_view line) {
  if (!text::iequals_prefix(line, "rank")) return std::nullopt;
  std::size_t i = 4;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const std::size_t digits_start = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_start) return std::nullopt;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  return line.substr(i + 1);
}

}  // namespace

std::string_view to_string(RankerMode mode) noexcept {
  switch (mode) {
    case RankerMode::None: return "none";
    case RankerMode::ZeroShot: return "zero-shot";
    case RankerMode::Trained: return "trained";
  }
  return "none";
}

RankerMode parse_ranker_mode(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "none") return RankerMode::None;
  if (n == "zero-shot" || n == "zeroshot" || n == "zero_shot") return RankerMode::ZeroShot;
  if (n == "trained" || n == "sft-dpo" || n == "sft_dpo") return RankerMode::Trained;
  fail(ErrorCode::InvalidArgument, "unknown ranker mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Prompts

Prompt build_prompt(const History& history, const Slate& slate, const Catalog& catalog, RankerMode mode) {
  require(!slate.items.empty(), "cannot build a prompt for an empty slate");
  Prompt prompt;
  prompt.system = std::string(mode == RankerMode::ZeroShot ? kZeroShotSystem : kTrainedSystem);

  std::string& u = prompt.user;
  u += "User: " + slate.user.str() + "\n";
  u += "User history:\n";
  if (history.entries.empty()) u += "(none)\n";
  for (const auto& e : history.entries) {
    u += build_item_description(catalog.at(e.item));
    u += " | rated " + format_rating(e.rating) + "\n";
  }
  u += "Candidates:\n";
  for (const auto& id : slate.items) {
    u += build_item_description(catalog.at(id));
    u += '\n';
  }
  u += "\nRank all " + std::to_string(slate.items.size()) + " candidates.";
  return prompt;
}

std::vector<ItemId> listed_items(std::string_view user_prompt, std::string_view header) {
  std::vector<ItemId> out;
  std::size_t pos = 0;
  bool in_block = false;
  while (pos <= user_prompt.size()) {
    auto end = user_prompt.find('\n', pos);
    if (end == std::string_view::npos) end = user_prompt.size();
    const auto line = user_prompt.substr(pos, end - pos);
    pos = end + 1;
    if (!in_block) {
      in_block = text::trim(line) == header;
      continue;
    }
    if (line.empty() || line.front() != '[') break;
    const auto close = line.find(']');
    if (close == std::string_view::npos || close == 1) break;
    out.emplace_back(std::string(line.substr(1, close - 1)));
  }
  return out;
}

std::string prompt_user(std::string_view user_prompt) {
  if (!user_prompt.starts_with("User: ")) return {};
  const auto end = user_prompt.find('\n');
  return std::string(text::trim(user_prompt.substr(6, end == std::string_view::npos ? end : end - 6)));
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<ItemId> RankingOutput::order() const {
  std::vector<ItemId> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.item);
  return out;
}

RankingOutput parse_ranking(std::string_view raw, const Slate& slate, const Catalog* catalog, ParseMode mode) {
  const bool strict = mode == ParseMode::Strict;
  const ItemResolver resolver(slate, catalog);
  RankingOutput out;
  out.user = slate.user;
  out.raw_text = std::string(raw);
  std::set<ItemId> seen;

  auto bad_line = [&](std::size_t line_no, std::string_view why) {
    fail(ErrorCode::UnparseableOutput, "line " + std::to_string(line_no) + ": " + std::string(why), line_no);
  };

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < raw.size()) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    const auto line = text::trim(raw.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto rest_opt = match_rank_prefix(line);
    if (!rest_opt) {
      if (strict) bad_line(line_no, "expected 'Rank <k>: <item> - <reason>'");
      continue;
    }
    const auto rest = text::trim(*rest_opt);
    if (rest.empty()) {
      if (strict) bad_line(line_no, "missing item");
      continue;
    }

    // The item token ends at the first " - " whose prefix resolves; titles
    // may themselves contain " - ".
    std::optional<ItemId> item;
    std::string_view reason;
    std::string_view first_token = rest;
    bool first_split = true;
    for (auto sep = rest.find(" - "); sep != std::string_view::npos; sep = rest.find(" - ", sep + 1)) {
      const auto token = rest.substr(0, sep);
      if (first_split) {
        first_token = token;
        first_split = false;
      }
      if ((item = resolver.resolve(token))) {
        reason = text::trim(rest.substr(sep + 3));
        break;
      }
    }
    if (!item) item = resolver.resolve(rest);
    if (!item) {
      const auto token = strip_decoration(first_token);
      out.hallucinated.insert(std::string(token.empty() ? first_token : token));
      continue;
    }
    if (strict && reason.empty()) bad_line(line_no, "missing reason");
    if (!seen.insert(*item).second) continue;
    out.ranked.push_back({*item, out.ranked.size() + 1, std::string(reason)});
  }

  if (strict && out.ranked.empty()) fail(ErrorCode::UnparseableOutput, "no slate item recovered");
  for (const auto& id : slate.items) {
    if (!seen.count(id)) out.missing.insert(id);
  }
  return out;
}

std::string format_ranking(const std::vector<RankedItem>& ranked) {
  std::string out;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Rank " + std::to_string(ranked[i].rank) + ": " + ranked[i].item.str() + " - " +
           text::single_line(ranked[i].reason);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrapping and aggregation

std::vector<Slate> bootstrap_shuffles(const Slate& slate, std::size_t k, std::uint64_t seed) {
  require(k >= 1, "bootstrap count must be >= 1");
  Rng rng(derive_seed(seed, "bootstrap:" + slate.user.str()));
  std::vector<Slate> out;
  out.reserve(k);
  for (std::size_t b = 0; b < k; ++b) {
    Slate s = slate;
    rng.shuffle(std::span(s.items));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ItemId> ConsensusRanking::order() const {
  std::vector<ItemId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.item);
  return out;
}

ConsensusRanking aggregate_self_consistency(const std::vector<RankingOutput>& outputs, const Slate& slate) {
  if (outputs.empty()) fail(ErrorCode::EmptyOutputs, "no ranking outputs to aggregate");
  const std::set<ItemId> slate_items(slate.items.begin(), slate.items.end());
  const std::size_t penalty = slate.items.size() + 1;

  std::map<ItemId, std::size_t> score;
  for (const auto& id : slate_items) score[id] = 0;
  for (std::size_t o = 0; o < outputs.size(); ++o) {
    const auto& out = outputs[o];
    auto mismatch = [&](const std::string& why) {
      fail(ErrorCode::SlateMismatch, "output " + std::to_string(o) + ": " + why);
    };
    if (out.user != slate.user) mismatch("user " + out.user.str() + " differs from slate user " + slate.user.str());
    std::set<ItemId> covered;
    for (std::size_t pos = 0; pos < out.ranked.size(); ++pos) {
      const auto& item = out.ranked[pos].item;
      if (!slate_items.count(item)) mismatch("item " + item.str() + " not in slate");
      if (!covered.insert(item).second) mismatch("item " + item.str() + " ranked twice");
      // Position in the list; ranks are contiguous after parsing.
      score[item] += pos + 1;
    }
    for (const auto& item : out.missing) {
      if (!slate_items.count(item)) mismatch("missing item " + item.str() + " not in slate");
      if (!covered.insert(item).second) mismatch("item " + item.str() + " both ranked and missing");
      score[item] += penalty;
    }
    if (covered.size() != slate_items.size()) mismatch("does not cover every slate item");
  }

  ConsensusRanking consensus{slate.user, {}};
  consensus.entries.reserve(score.size());
  for (const auto& [item, s] : score) consensus.entries.push_back({item, s});
  std::stable_sort(consensus.entries.begin(), consensus.entries.end(),
                   [](const ConsensusEntry& a, const ConsensusEntry& b) { return a.score < b.score; });
  return consensus;
}

ConsensusRanking none_ranker(const Slate& slate) {
  require(!slate.items.empty(), "none_ranker needs a non-empty slate");
  ConsensusRanking out{slate.user, {}};
  for (std::size_t i = 0; i < slate.items.size(); ++i) out.entries.push_back({slate.items[i], i + 1});
  return out;
}

RankingOutput all_missing_output(const Slate& slate, std::string raw_text) {
  RankingOutput out;
  out.user = slate.user;
  out.raw_text = std::move(raw_text);
  out.missing.insert(slate.items.begin(), slate.items.end());
  return out;
}

RerankResult rerank_user(const History& history, const Slate& slate, const Catalog& catalog, ChatBackend& backend,
                         const RerankOptions& options) {
  RerankResult result;
  result.shuffles = bootstrap_shuffles(slate, options.bootstraps, options.seed);

  std::vector<ChatRequest> requests;
  requests.reserve(result.shuffles.size());
  for (std::size_t b = 0; b < result.shuffles.size(); ++b) {
    const auto prompt = build_prompt(history, result.shuffles[b], catalog, options.mode);
    ChatRequest req;
    req.system_prompt = prompt.system;
    req.user_prompt = prompt.user;
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.seed = static_cast<std::int64_t>(
        derive_seed(options.seed, "request:" + slate.user.str() + ":" + std::to_string(b)) >> 1);
    requests.push_back(std::move(req));
  }

  const auto responses = complete_batch(backend, requests);
  std::size_t failed = 0;
  for (std::size_t b = 0; b < responses.size(); ++b) {
    const auto& shuffle = result.shuffles[b];
    if (!responses[b].ok()) {
      ++failed;
      result.failures.emplace_back(responses[b].error().what());
      result.outputs.push_back(all_missing_output(shuffle));
      continue;
    }
    const auto& text = responses[b].response().text;
    try {
      auto parsed = parse_ranking(text, shuffle, &catalog, options.parse_mode);
      if (parsed.ranked.empty()) {
        ++failed;
        result.failures.emplace_back("no slate item recovered");
      } else {
        result.failures.emplace_back();
      }
      result.outputs.push_back(std::move(parsed));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableOutput) throw;
      ++failed;
      result.failures.emplace_back(e.what());
      result.outputs.push_back(all_missing_output(shuffle, text));
    }
  }

  if (failed == responses.size()) {
    if (options.parse_mode == ParseMode::Strict) {
      fail(ErrorCode::AllBootstrapsFailed, "all " + std::to_string(failed) + " bootstraps failed for user " +
                                               slate.user.str() + ": " + result.failures.front());
    }
    result.fell_back = true;
    result.consensus = none_ranker(slate);
    return result;
  }
  result.consensus = aggregate_self_consistency(result.outputs, slate);
  return result;
}

std::string rerank_trace_json(const RerankResult& result) {
  nlohmann::ordered_json j;
  j["user"] = result.consensus.user.str();
  auto& shuffles = j["shuffles"] = nlohmann::ordered_json::array();
  for (const auto& s : result.shuffles) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& id : s.items) arr.push_back(id.str());
    shuffles.push_back(std::move(arr));
  }
  auto& raw = j["raw_texts"] = nlohmann::ordered_json::array();
  auto& parsed = j["parsed"] = nlohmann::ordered_json::array();
  for (const auto& o : result.outputs) {
    raw.push_back(o.raw_text);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : o.ranked) arr.push_back({{"item", r.item.str()}, {"rank", r.rank}, {"reason", r.reason}});
    parsed.push_back(std::move(arr));
  }
  auto& consensus = j["consensus"] = nlohmann::ordered_json::array();
  for (const auto& e : result.consensus.entries) consensus.push_back({{"item", e.item.str()}, {"score", e.score}});
  j["failures"] = result.failures;
  j["fell_back"] = result.fell_back;
  return j.dump();
}

}  // namespace llmrerank
