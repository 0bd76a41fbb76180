#include "llmrerank/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>

#include "io.hpp"
#include "llmrerank/error.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::Config, key + " = '" + value + "': expected " + expected);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto t = text::trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = text::trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto t = text::trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = text::to_lower(text::trim(v));
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  bad_value(key, v, "true or false");
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

std::string_view script_name(ScriptKind k) {
  switch (k) {
    case ScriptKind::Echo: return "echo";
    case ScriptKind::Oracle: return "oracle";
    case ScriptKind::Fixture: return "fixture";
  }
  return "echo";
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    auto count = [&](std::string key, std::size_t RunConfig::*m) {
      f.push_back({key, [key, m](RunConfig& c, const std::string& v) { c.*m = to_count(key, v); },
                   [m](const RunConfig& c) { return std::to_string(c.*m); }});
    };
    auto real = [&](std::string key, double RunConfig::*m) {
      f.push_back({key, [key, m](RunConfig& c, const std::string& v) { c.*m = to_real(key, v); },
                   [m](const RunConfig& c) { return real_text(c.*m); }});
    };
    auto flag = [&](std::string key, bool RunConfig::*m) {
      f.push_back({key, [key, m](RunConfig& c, const std::string& v) { c.*m = to_bool(key, v); },
                   [m](const RunConfig& c) { return bool_text(c.*m); }});
    };
    auto path = [&](std::string key, std::filesystem::path RunConfig::*m) {
      f.push_back({key, [m](RunConfig& c, const std::string& v) { c.*m = std::string(text::trim(v)); },
                   [m](const RunConfig& c) { return (c.*m).string(); }});
    };
    auto text_field = [&](std::string key, std::string RunConfig::*m) {
      f.push_back({key, [m](RunConfig& c, const std::string& v) { c.*m = std::string(text::trim(v)); },
                   [m](const RunConfig& c) { return c.*m; }});
    };

    path("data.ratings", &RunConfig::ratings);
    path("data.items", &RunConfig::items);
    path("data.run_dir", &RunConfig::run_dir);
    flag("data.lenient", &RunConfig::lenient_rows);

    count("split.n_test", &RunConfig::n_test);
    count("split.min_history", &RunConfig::min_history);
    real("split.relevance_threshold", &RunConfig::relevance_threshold);
    count("split.history_limit", &RunConfig::history_limit);
    f.push_back({"split.history_sample",
                 [](RunConfig& c, const std::string& v) {
                   const auto t = text::trim(v);
                   if (t == "recent") {
                     c.history_random_seed.reset();
                   } else if (t.starts_with("random:")) {
                     c.history_random_seed = to_u64("split.history_sample", std::string(t.substr(7)));
                   } else {
                     bad_value("split.history_sample", v, "recent or random:<seed>");
                   }
                 },
                 [](const RunConfig& c) {
                   return c.history_random_seed ? "random:" + std::to_string(*c.history_random_seed)
                                                : std::string("recent");
                 }});

    f.push_back({"candgen.generator",
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.generator = parse_slate_source(v);
                   } catch (const Error&) {
                     bad_value("candgen.generator", v, "random, mf, item-knn or external");
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.generator)); }});
    count("candgen.slate_size", &RunConfig::slate_size);
    count("candgen.inject_positives", &RunConfig::inject_positives);
    path("candgen.external_slates", &RunConfig::external_slates);
    f.push_back({"candgen.mf_factors", [](RunConfig& c, const std::string& v) { c.mf.factors = to_count("candgen.mf_factors", v); },
                 [](const RunConfig& c) { return std::to_string(c.mf.factors); }});
    f.push_back({"candgen.mf_epochs", [](RunConfig& c, const std::string& v) { c.mf.epochs = to_count("candgen.mf_epochs", v); },
                 [](const RunConfig& c) { return std::to_string(c.mf.epochs); }});
    f.push_back({"candgen.mf_learn_rate", [](RunConfig& c, const std::string& v) { c.mf.learn_rate = to_real("candgen.mf_learn_rate", v); },
                 [](const RunConfig& c) { return real_text(c.mf.learn_rate); }});
    f.push_back({"candgen.mf_regularization", [](RunConfig& c, const std::string& v) { c.mf.regularization = to_real("candgen.mf_regularization", v); },
                 [](const RunConfig& c) { return real_text(c.mf.regularization); }});
    f.push_back({"candgen.mf_init_std", [](RunConfig& c, const std::string& v) { c.mf.init_std = to_real("candgen.mf_init_std", v); },
                 [](const RunConfig& c) { return real_text(c.mf.init_std); }});
    f.push_back({"candgen.knn_top_m", [](RunConfig& c, const std::string& v) { c.knn.top_m = to_count("candgen.knn_top_m", v); },
                 [](const RunConfig& c) { return std::to_string(c.knn.top_m); }});
    f.push_back({"candgen.knn_min_co_raters", [](RunConfig& c, const std::string& v) { c.knn.min_co_raters = to_count("candgen.knn_min_co_raters", v); },
                 [](const RunConfig& c) { return std::to_string(c.knn.min_co_raters); }});

    f.push_back({"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    count("run.sample_count", &RunConfig::sample_count);
    count("run.bootstraps", &RunConfig::bootstraps);
    f.push_back({"run.cutoffs",
                 [](RunConfig& c, const std::string& v) {
                   c.cutoffs.clear();
                   for (const auto& part : text::split(v, ',')) c.cutoffs.push_back(to_count("run.cutoffs", part));
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto n : c.cutoffs) out += (out.empty() ? "" : ",") + std::to_string(n);
                   return out;
                 }});
    f.push_back({"run.modes",
                 [](RunConfig& c, const std::string& v) {
                   c.modes.clear();
                   for (const auto& part : text::split(v, ',')) {
                     if (text::trim(part).empty()) continue;
                     RankerMode m;
                     try {
                       m = parse_ranker_mode(part);
                     } catch (const Error&) {
                       bad_value("run.modes", v, "a list of zero-shot, trained");
                     }
                     if (m != RankerMode::None) c.modes.push_back(m);
                   }
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto m : c.modes) out += (out.empty() ? "" : ",") + std::string(to_string(m));
                   return out.empty() ? std::string("none") : out;
                 }});
    count("run.workers", &RunConfig::workers);
    f.push_back({"run.parse",
                 [](RunConfig& c, const std::string& v) {
                   const auto t = text::to_lower(text::trim(v));
                   if (t == "strict") {
                     c.parse_mode = ParseMode::Strict;
                   } else if (t == "lenient") {
                     c.parse_mode = ParseMode::Lenient;
                   } else {
                     bad_value("run.parse", v, "strict or lenient");
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.parse_mode == ParseMode::Strict ? "strict" : "lenient"); }});
    real("run.temperature", &RunConfig::temperature);

    f.push_back({"backend.kind",
                 [](RunConfig& c, const std::string& v) {
                   const auto t = text::to_lower(text::trim(v));
                   if (t == "scripted") {
                     c.backend.kind = BackendKind::Scripted;
                   } else if (t == "http") {
                     c.backend.kind = BackendKind::Http;
                   } else {
                     bad_value("backend.kind", v, "scripted or http");
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.backend.kind == BackendKind::Http ? "http" : "scripted"); }});
    f.push_back({"backend.endpoint", [](RunConfig& c, const std::string& v) { c.backend.endpoint = std::string(text::trim(v)); },
                 [](const RunConfig& c) { return c.backend.endpoint; }});
    f.push_back({"backend.model", [](RunConfig& c, const std::string& v) { c.backend.model = std::string(text::trim(v)); },
                 [](const RunConfig& c) { return c.backend.model; }});
    text_field("backend.zero_shot_model", &RunConfig::zero_shot_model);
    text_field("backend.trained_model", &RunConfig::trained_model);
    f.push_back({"backend.api_key_env", [](RunConfig& c, const std::string& v) { c.backend.api_key_env = std::string(text::trim(v)); },
                 [](const RunConfig& c) { return c.backend.api_key_env; }});
    f.push_back({"backend.timeout_ms",
                 [](RunConfig& c, const std::string& v) {
                   c.backend.timeout = std::chrono::milliseconds(to_count("backend.timeout_ms", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.backend.timeout.count()); }});
    f.push_back({"backend.max_retries", [](RunConfig& c, const std::string& v) { c.backend.max_retries = to_count("backend.max_retries", v); },
                 [](const RunConfig& c) { return std::to_string(c.backend.max_retries); }});
    f.push_back({"backend.max_concurrent",
                 [](RunConfig& c, const std::string& v) { c.backend.max_concurrent_requests = to_count("backend.max_concurrent", v); },
                 [](const RunConfig& c) { return std::to_string(c.backend.max_concurrent_requests); }});
    f.push_back({"backend.backoff_ms",
                 [](RunConfig& c, const std::string& v) {
                   c.backend.backoff_base = std::chrono::milliseconds(to_count("backend.backoff_ms", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.backend.backoff_base.count()); }});
    f.push_back({"backend.script",
                 [](RunConfig& c, const std::string& v) {
                   const auto t = text::to_lower(text::trim(v));
                   if (t == "echo") {
                     c.script = ScriptKind::Echo;
                   } else if (t == "oracle") {
                     c.script = ScriptKind::Oracle;
                   } else if (t == "fixture") {
                     c.script = ScriptKind::Fixture;
                   } else {
                     bad_value("backend.script", v, "echo, oracle or fixture");
                   }
                 },
                 [](const RunConfig& c) { return std::string(script_name(c.script)); }});
    path("backend.fixture", &RunConfig::fixture);
    real("backend.fidelity", &RunConfig::fidelity);

    flag("dataset.offline", &RunConfig::offline);
    count("dataset.users", &RunConfig::dataset_users);
    count("dataset.ranking_size", &RunConfig::ranking_size);
    count("dataset.negatives", &RunConfig::negatives);
    count("dataset.pairs_per_sample", &RunConfig::pairs_per_sample);
    flag("dataset.regenerate_rejected", &RunConfig::regenerate_rejected);
    flag("dataset.summarize_with_backend", &RunConfig::summarize_with_backend);
    return f;
  }();
  return kFields;
}

void check(const RunConfig& c) {
  auto positive = [](std::size_t v, const char* key) {
    if (v < 1) fail(ErrorCode::Config, std::string(key) + " must be >= 1");
  };
  positive(c.n_test, "split.n_test");
  positive(c.min_history, "split.min_history");
  positive(c.history_limit, "split.history_limit");
  positive(c.slate_size, "candgen.slate_size");
  positive(c.mf.factors, "candgen.mf_factors");
  positive(c.knn.top_m, "candgen.knn_top_m");
  positive(c.sample_count, "run.sample_count");
  positive(c.bootstraps, "run.bootstraps");
  positive(c.workers, "run.workers");
  positive(c.dataset_users, "dataset.users");
  positive(c.ranking_size, "dataset.ranking_size");
  positive(c.pairs_per_sample, "dataset.pairs_per_sample");
  positive(c.backend.max_concurrent_requests, "backend.max_concurrent");
  if (c.cutoffs.empty()) fail(ErrorCode::Config, "run.cutoffs is empty");
  for (const auto n : c.cutoffs) {
    if (n < 1 || n > c.slate_size) {
      fail(ErrorCode::Config, "cutoff " + std::to_string(n) + " outside [1, slate_size]");
    }
  }
  if (c.negatives > c.ranking_size) fail(ErrorCode::Config, "dataset.negatives exceeds dataset.ranking_size");
  if (c.fidelity < 0.0 || c.fidelity > 1.0) fail(ErrorCode::Config, "backend.fidelity outside [0, 1]");
  if (c.temperature < 0.0) fail(ErrorCode::Config, "run.temperature must be >= 0");
  if (c.backend.timeout.count() <= 0) fail(ErrorCode::Config, "backend.timeout_ms must be > 0");
}

}  // namespace

ConfigMap parse_config_text(std::string_view content) {
  ConfigMap out;
  std::string section;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::Config, "line " + std::to_string(line_no) + ": unterminated section");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    if (key.empty()) fail(ErrorCode::Config, "line " + std::to_string(line_no) + ": empty key");
    out[section.empty() ? key : section + "." + key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
  }();
  return kKeys;
}

RunConfig apply_config(const ConfigMap& values, RunConfig base) {
  for (const auto& [key, value] : values) {
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) fail(ErrorCode::Config, "unknown config key '" + key + "'");
    it->set(base, value);
  }
  check(base);
  return base;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const ConfigMap& overrides) {
  // Merged first so validation sees the final values.
  ConfigMap merged = file ? parse_config_text(io::read_file(*file)) : ConfigMap{};
  for (const auto& [key, value] : overrides) merged[key] = value;
  return apply_config(merged);
}

std::string render_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const auto s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += '\n';
      out += "[" + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string model_for(const RunConfig& config, RankerMode mode) {
  if (mode == RankerMode::ZeroShot && !config.zero_shot_model.empty()) return config.zero_shot_model;
  if (mode == RankerMode::Trained && !config.trained_model.empty()) return config.trained_model;
  return config.backend.model;
}

}  // namespace llmrerank
