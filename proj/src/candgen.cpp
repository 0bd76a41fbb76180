#include "llmrerank/candgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "llmrerank/error.hpp"
#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

std::vector<ItemId> eligible_items(const Catalog& catalog, const std::set<ItemId>& exclusions,
                                   std::size_t slate_size, const UserId& user) {
  std::vector<ItemId> out;
  out.reserve(catalog.size());
  for (const auto& [id, card] : catalog.items()) {
    if (!exclusions.count(id)) out.push_back(id);
  }
  if (out.size() < slate_size) {
    fail(ErrorCode::CatalogTooSmall, "user " + user.str() + ": " + std::to_string(out.size()) +
                                         " eligible items for a slate of " + std::to_string(slate_size));
  }
  return out;
}

/// Sorted sample of up to `count` relevant items that are also eligible.
std::vector<ItemId> sample_positives(const RelevanceSet& relevance, const std::set<ItemId>& exclusions,
                                     const Catalog& catalog, std::size_t count, Rng& rng) {
  std::vector<ItemId> pool;
  for (const auto& id : relevance.relevant) {
    if (!exclusions.count(id) && catalog.contains(id)) pool.push_back(id);
  }
  rng.shuffle(std::span(pool));
  if (pool.size() > count) pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::string_view to_string(SlateSource source) noexcept {
  switch (source) {
    case SlateSource::Random: return "random";
    case SlateSource::ItemKnn: return "item-knn";
    case SlateSource::MatrixFactorization: return "mf";
    case SlateSource::External: return "external";
  }
  return "external";
}

SlateSource parse_slate_source(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "random") return SlateSource::Random;
  if (n == "item-knn" || n == "itemknn" || n == "knn") return SlateSource::ItemKnn;
  if (n == "mf" || n == "svd" || n == "matrix-factorization") return SlateSource::MatrixFactorization;
  if (n == "external") return SlateSource::External;
  fail(ErrorCode::InvalidArgument, "unknown slate source '" + std::string(name) + "'");
}

void validate_slate(const Slate& slate, std::size_t slate_size, const std::set<ItemId>& train_items) {
  if (slate.items.size() != slate_size) {
    fail(ErrorCode::InvalidArgument, "slate for user " + slate.user.str() + " has " +
                                         std::to_string(slate.items.size()) + " items, expected " +
                                         std::to_string(slate_size));
  }
  std::set<ItemId> seen;
  for (const auto& id : slate.items) {
    if (!seen.insert(id).second) {
      fail(ErrorCode::InvalidArgument, "slate for user " + slate.user.str() + " repeats item " + id.str());
    }
    if (train_items.count(id)) {
      fail(ErrorCode::InvalidArgument, "slate for user " + slate.user.str() + " contains train item " + id.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Random retrieval

Slate gen_random_slate(const UserId& user, const Catalog& catalog, const std::set<ItemId>& exclusions,
                       std::uint64_t seed, std::size_t slate_size) {
  auto pool = eligible_items(catalog, exclusions, slate_size, user);
  Rng rng(derive_seed(seed, "random-slate:" + user.str()));
  // Partial Fisher-Yates: the first slate_size positions end up uniform.
  for (std::size_t i = 0; i < slate_size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(slate_size);
  return Slate{user, std::move(pool), SlateSource::Random};
}

Slate gen_random_slate_with_positives(const UserId& user, const Catalog& catalog,
                                      const std::set<ItemId>& exclusions, std::size_t inject_positives,
                                      const RelevanceSet& relevance, std::uint64_t seed, std::size_t slate_size) {
  auto pool = eligible_items(catalog, exclusions, slate_size, user);
  Rng rng(derive_seed(seed, "random-slate:" + user.str()));
  auto items = sample_positives(relevance, exclusions, catalog, std::min(inject_positives, slate_size), rng);

  const std::set<ItemId> injected(items.begin(), items.end());
  std::erase_if(pool, [&](const ItemId& id) { return injected.count(id) != 0; });
  const std::size_t fill = slate_size - items.size();
  for (std::size_t i = 0; i < fill; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
    items.push_back(pool[i]);
  }
  rng.shuffle(std::span(items));
  return Slate{user, std::move(items), SlateSource::Random};
}

// ---------------------------------------------------------------------------
// Matrix factorization

MfModel train_mf(const std::vector<Interaction>& train, const MfConfig& config) {
  require(!train.empty(), "train_mf needs at least one interaction");
  require(config.factors >= 1, "factor count must be >= 1");

  // Dense indices for the inner loop; maps only at the boundary.
  std::map<UserId, std::size_t> user_index;
  std::map<ItemId, std::size_t> item_index;
  for (const auto& r : train) {
    user_index.emplace(r.user, 0);
    item_index.emplace(r.item, 0);
  }
  std::vector<UserId> users;
  std::vector<ItemId> items;
  for (auto& [id, idx] : user_index) { idx = users.size(); users.push_back(id); }
  for (auto& [id, idx] : item_index) { idx = items.size(); items.push_back(id); }

  struct Obs { std::size_t u, i; double r; };
  std::vector<Obs> obs;
  obs.reserve(train.size());
  double sum = 0.0;
  for (const auto& r : train) {
    obs.push_back({user_index.at(r.user), item_index.at(r.item), r.rating});
    sum += r.rating;
  }
  const double mu = sum / static_cast<double>(obs.size());
  const std::size_t k = config.factors;

  Rng rng(derive_seed(config.seed, "mf"));
  std::vector<double> p(users.size() * k), q(items.size() * k);
  for (auto& v : p) v = config.init_std > 0 ? rng.normal(0.0, config.init_std) : 0.0;
  for (auto& v : q) v = config.init_std > 0 ? rng.normal(0.0, config.init_std) : 0.0;
  std::vector<double> bu(users.size(), 0.0), bi(items.size(), 0.0);

  auto predict = [&](std::size_t u, std::size_t i) {
    double dot = 0.0;
    for (std::size_t f = 0; f < k; ++f) dot += p[u * k + f] * q[i * k + f];
    return mu + bu[u] + bi[i] + dot;
  };

  MfModel model;
  model.factors = k;
  model.global_mean = mu;

  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = config.learn_rate;
  const double reg = config.regularization;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const auto idx : order) {
      const auto& o = obs[idx];
      const double err = o.r - predict(o.u, o.i);
      bu[o.u] += lr * (err - reg * bu[o.u]);
      bi[o.i] += lr * (err - reg * bi[o.i]);
      double* pu = &p[o.u * k];
      double* qi = &q[o.i * k];
      for (std::size_t f = 0; f < k; ++f) {
        const double pf = pu[f];
        pu[f] += lr * (err * qi[f] - reg * pf);
        qi[f] += lr * (err * pf - reg * qi[f]);
      }
    }
    double sse = 0.0;
    for (const auto& o : obs) {
      const double e = o.r - predict(o.u, o.i);
      sse += e * e;
    }
    const double rmse = std::sqrt(sse / static_cast<double>(obs.size()));
    if (!std::isfinite(rmse)) {
      fail(ErrorCode::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch + 1) +
                                         "; lower the learn rate");
    }
    model.epoch_rmse.push_back(rmse);
  }

  for (std::size_t u = 0; u < users.size(); ++u) {
    model.user_factors.emplace(users[u], std::vector<double>(p.begin() + u * k, p.begin() + (u + 1) * k));
    model.user_bias.emplace(users[u], bu[u]);
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    model.item_factors.emplace(items[i], std::vector<double>(q.begin() + i * k, q.begin() + (i + 1) * k));
    model.item_bias.emplace(items[i], bi[i]);
  }
  return model;
}

double score_mf(const MfModel& model, const UserId& user, const ItemId& item) {
  double score = model.global_mean;
  const auto ub = model.user_bias.find(user);
  if (ub != model.user_bias.end()) score += ub->second;
  const auto ib = model.item_bias.find(item);
  if (ib != model.item_bias.end()) score += ib->second;
  const auto pu = model.user_factors.find(user);
  const auto qi = model.item_factors.find(item);
  if (pu != model.user_factors.end() && qi != model.item_factors.end()) {
    score += std::inner_product(pu->second.begin(), pu->second.end(), qi->second.begin(), 0.0);
  }
  return score;
}

// ---------------------------------------------------------------------------
// Item kNN

double ItemSimMatrix::similarity(const ItemId& a, const ItemId& b) const {
  const auto it = neighbors.find(a);
  if (it == neighbors.end()) return 0.0;
  for (const auto& n : it->second) {
    if (n.item == b) return n.similarity;
  }
  return 0.0;
}

bool ItemSimMatrix::has_pair(const ItemId& a, const ItemId& b) const {
  const auto it = neighbors.find(a);
  if (it == neighbors.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(), [&](const Neighbor& n) { return n.item == b; });
}

ItemSimMatrix build_item_knn(const std::vector<Interaction>& train, const KnnConfig& config) {
  require(config.top_m >= 1, "top_m must be >= 1");

  std::map<ItemId, std::size_t> item_index;
  for (const auto& r : train) item_index.emplace(r.item, 0);
  std::vector<ItemId> items;
  for (auto& [id, idx] : item_index) { idx = items.size(); items.push_back(id); }

  // Last rating wins for repeated (user, item) rows.
  std::map<UserId, std::map<std::size_t, double>> by_user;
  for (const auto& r : train) by_user[r.user][item_index.at(r.item)] = r.rating;

  std::vector<double> sum(items.size(), 0.0);
  std::vector<std::size_t> count(items.size(), 0);
  for (const auto& [user, ratings] : by_user) {
    for (const auto& [i, r] : ratings) { sum[i] += r; ++count[i]; }
  }
  std::vector<double> mean(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) mean[i] = sum[i] / static_cast<double>(count[i]);

  struct Acc { double dot = 0, na = 0, nb = 0; std::size_t n = 0; };
  std::unordered_map<std::uint64_t, Acc> acc;
  std::vector<std::pair<std::size_t, double>> centered;
  for (const auto& [user, ratings] : by_user) {
    centered.clear();
    for (const auto& [i, r] : ratings) centered.emplace_back(i, r - mean[i]);
    for (std::size_t x = 0; x < centered.size(); ++x) {
      for (std::size_t y = x + 1; y < centered.size(); ++y) {
        const auto [a, va] = centered[x];
        const auto [b, vb] = centered[y];
        auto& s = acc[(static_cast<std::uint64_t>(a) << 32) | b];
        s.dot += va * vb;
        s.na += va * va;
        s.nb += vb * vb;
        ++s.n;
      }
    }
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> lists(items.size());
  for (const auto& [key, s] : acc) {
    if (s.n < config.min_co_raters || s.na <= 0.0 || s.nb <= 0.0) continue;
    const double sim = std::clamp(s.dot / (std::sqrt(s.na) * std::sqrt(s.nb)), -1.0, 1.0);
    const auto a = static_cast<std::size_t>(key >> 32);
    const auto b = static_cast<std::size_t>(key & 0xffffffffULL);
    lists[a].emplace_back(b, sim);
    lists[b].emplace_back(a, sim);
  }

  ItemSimMatrix out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& l = lists[i];
    std::sort(l.begin(), l.end(), [&](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return items[x.first] < items[y.first];
    });
    if (l.size() > config.top_m) l.resize(config.top_m);
    if (l.empty()) continue;
    auto& dst = out.neighbors[items[i]];
    for (const auto& [j, sim] : l) dst.push_back({items[j], sim});
  }
  return out;
}

std::map<ItemId, double> knn_scores(const ItemSimMatrix& sims, const std::vector<Interaction>& user_rows) {
  std::map<ItemId, double> scores;
  for (const auto& r : user_rows) {
    const auto it = sims.neighbors.find(r.item);
    if (it == sims.neighbors.end()) continue;
    for (const auto& n : it->second) scores[n.item] += n.similarity * r.rating;
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Model slates

Slate gen_model_slate(const UserId& user, const ItemScorer& scorer, SlateSource source, const Catalog& catalog,
                      const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                      const ModelSlateRequest& request) {
  const auto pool = eligible_items(catalog, exclusions, request.slate_size, user);
  Rng rng(derive_seed(request.seed, "inject:" + user.str()));
  const auto injected_list = sample_positives(relevance, exclusions, catalog,
                                              std::min(request.inject_positives, request.slate_size), rng);
  const std::set<ItemId> injected(injected_list.begin(), injected_list.end());

  std::vector<std::pair<ItemId, double>> scored;
  scored.reserve(pool.size());
  for (const auto& id : pool) scored.emplace_back(id, scorer(id));
  auto by_score = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::sort(scored.begin(), scored.end(), by_score);

  std::vector<std::pair<ItemId, double>> chosen;
  const std::size_t fill = request.slate_size - injected.size();
  std::size_t taken = 0;
  for (const auto& entry : scored) {
    if (injected.count(entry.first)) {
      chosen.push_back(entry);
    } else if (taken < fill) {
      chosen.push_back(entry);
      ++taken;
    }
  }
  // `scored` is already in final order, so `chosen` is too.
  Slate slate{user, {}, source};
  slate.items.reserve(chosen.size());
  for (const auto& [id, s] : chosen) slate.items.push_back(id);
  return slate;
}

Slate gen_mf_slate(const UserId& user, const MfModel& model, const Catalog& catalog,
                   const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                   const ModelSlateRequest& request) {
  return gen_model_slate(
      user, [&](const ItemId& item) { return score_mf(model, user, item); }, SlateSource::MatrixFactorization,
      catalog, exclusions, relevance, request);
}

Slate gen_knn_slate(const UserId& user, const ItemSimMatrix& sims, const std::vector<Interaction>& user_rows,
                    const Catalog& catalog, const std::set<ItemId>& exclusions, const RelevanceSet& relevance,
                    const ModelSlateRequest& request) {
  if (user_rows.empty()) fail(ErrorCode::UnknownUser, "user " + user.str() + " has no rated items for kNN");
  const auto scores = knn_scores(sims, user_rows);
  return gen_model_slate(
      user,
      [&](const ItemId& item) {
        const auto it = scores.find(item);
        return it == scores.end() ? 0.0 : it->second;
      },
      SlateSource::ItemKnn, catalog, exclusions, relevance, request);
}

// ---------------------------------------------------------------------------
// Slate files

std::string slates_to_jsonl(const std::vector<Slate>& slates) {
  std::string out;
  for (const auto& s : slates) {
    nlohmann::ordered_json j;
    j["user"] = s.user.str();
    auto& items = j["items"] = nlohmann::ordered_json::array();
    for (const auto& id : s.items) items.push_back(id.str());
    j["source"] = std::string(to_string(s.source));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Slate> slates_from_jsonl(std::string_view content) {
  std::vector<Slate> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = text::trim(content.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorCode::MalformedRow, "slate line " + std::to_string(line_no) + ": " + why, line_no);
    };
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("user") || !j.contains("items") || !j["items"].is_array()) {
        bad("expected {user, items[], source}");
      }
      auto id_text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      Slate s;
      s.user = UserId(id_text(j["user"]));
      for (const auto& v : j["items"]) s.items.emplace_back(id_text(v));
      s.source = j.contains("source") ? parse_slate_source(j["source"].get<std::string>()) : SlateSource::External;
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      bad(e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedRow) throw;
      bad(e.what());
    }
  }
  return out;
}

}  // namespace llmrerank
