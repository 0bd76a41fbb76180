#include "llmrerank/responders.hpp"

#include "llmrerank/random.hpp"
#include "llmrerank/rerank.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

std::optional<std::string> overview_to_summarize(std::string_view prompt) {
  const auto pos = prompt.find("Overview:");
  if (pos == std::string_view::npos) return std::nullopt;
  return text::first_words(prompt.substr(pos + 9), kOverviewWordLimit);
}

std::vector<ItemId> prompt_items(std::string_view prompt) {
  auto items = listed_items(prompt, "Candidates:");
  if (items.empty()) items = listed_items(prompt, "Ranking:");
  return items;
}

std::string echo_ranking(const std::vector<ItemId>& items) {
  std::vector<RankedItem> ranked;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ranked.push_back({items[i], i + 1, "Listed at position " + std::to_string(i + 1) + "."});
  }
  return format_ranking(ranked);
}

}  // namespace

Responder make_echo_responder() {
  return [](const ChatRequest& request) -> std::optional<std::string> {
    if (auto summary = overview_to_summarize(request.user_prompt)) return summary;
    const auto items = prompt_items(request.user_prompt);
    if (items.empty()) return std::nullopt;
    return echo_ranking(items);
  };
}

Responder make_oracle_responder(std::map<UserId, std::set<ItemId>> relevance, double fidelity, std::uint64_t seed) {
  return [relevance = std::move(relevance), fidelity, seed](const ChatRequest& request) -> std::optional<std::string> {
    if (auto summary = overview_to_summarize(request.user_prompt)) return summary;
    const auto candidates = listed_items(request.user_prompt, "Candidates:");
    if (candidates.empty()) {
      const auto fixed = listed_items(request.user_prompt, "Ranking:");
      if (fixed.empty()) return std::nullopt;
      return echo_ranking(fixed);
    }
    const auto user = prompt_user(request.user_prompt);
    static const std::set<ItemId> kNone;
    const auto it = user.empty() ? relevance.end() : relevance.find(UserId(user));
    const auto& relevant = it == relevance.end() ? kNone : it->second;

    Rng rng(derive_seed(seed, "oracle:" + prompt_hash(request)));
    std::vector<RankedItem> liked, rest;
    for (const auto& id : candidates) {
      bool perceived = relevant.count(id) != 0;
      if (rng.uniform01() >= fidelity) perceived = !perceived;
      if (perceived) {
        liked.push_back({id, 0, "Strong match with the user's highly rated history."});
      } else {
        rest.push_back({id, 0, "Weaker match with the user's history."});
      }
    }
    liked.insert(liked.end(), rest.begin(), rest.end());
    for (std::size_t i = 0; i < liked.size(); ++i) liked[i].rank = i + 1;
    return format_ranking(liked);
  };
}

}  // namespace llmrerank
