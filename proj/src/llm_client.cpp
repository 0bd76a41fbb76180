#include "llmrerank/llm_client.hpp"

#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "llmrerank/random.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

void validate_request(const ChatRequest& request) {
  require(!text::trim(request.system_prompt).empty(), "system prompt is empty");
  require(!text::trim(request.user_prompt).empty(), "user prompt is empty");
  require(std::isfinite(request.temperature) && request.temperature >= 0.0, "temperature must be finite and >= 0");
}

std::string prompt_hash(const ChatRequest& request) {
  std::string joined = request.system_prompt;
  joined += '\x1f';
  joined += request.user_prompt;
  return text::hex64(fnv1a64(joined));
}

void validate_backend_config(const BackendConfig& config) {
  if (config.timeout.count() <= 0) fail(ErrorCode::Config, "backend timeout must be positive");
  if (config.max_concurrent_requests == 0) fail(ErrorCode::Config, "max_concurrent_requests must be >= 1");
  if (config.kind == BackendKind::Http) {
    if (config.endpoint.empty()) fail(ErrorCode::Config, "http backend needs an endpoint");
    if (config.model.empty()) fail(ErrorCode::Config, "http backend needs a model name");
  }
}

// ---------------------------------------------------------------------------

ChatBackend::ChatBackend(std::size_t max_concurrent) : max_concurrent_(max_concurrent == 0 ? 1 : max_concurrent) {}

ChatResponse ChatBackend::complete(const ChatRequest& request) {
  validate_request(request);
  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [&] { return in_flight_ < max_concurrent_; });
    ++in_flight_;
  }
  struct Release {
    ChatBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};
  ++requests_;
  return do_complete(request);
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedFixture ScriptedFixture::from_jsonl(std::string_view content) {
  ScriptedFixture fixture;
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
      fail(ErrorCode::MalformedRow, "fixture line " + std::to_string(line_no) + ": " + why, line_no);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      bad(e.what());
    }
    if (!j.is_object()) bad("object expected");
    if (j.contains("default")) {
      fixture.default_response = j["default"].get<std::string>();
      continue;
    }
    ScriptRule rule;
    if (j.contains("prompt_hash")) rule.prompt_hash = j["prompt_hash"].get<std::string>();
    if (j.contains("prompt_contains")) rule.prompt_contains = j["prompt_contains"].get<std::string>();
    if (!rule.prompt_hash && !rule.prompt_contains) bad("needs prompt_hash or prompt_contains");
    rule.response = j.value("response", "");
    if (j.contains("status")) {
      rule.error = ErrorCode::HttpStatus;
      rule.status = j["status"].get<int>();
    }
    if (j.contains("error")) {
      const auto kind = j["error"].get<std::string>();
      if (kind == "timeout") {
        rule.error = ErrorCode::Timeout;
      } else if (kind == "transport") {
        rule.error = ErrorCode::Transport;
      } else {
        bad("unknown error kind '" + kind + "'");
      }
    }
    fixture.rules.push_back(std::move(rule));
  }
  return fixture;
}

ScriptedBackend::ScriptedBackend(ScriptedFixture fixture, Responder responder, std::size_t max_concurrent)
    : ChatBackend(max_concurrent), fixture_(std::move(fixture)), responder_(std::move(responder)) {}

ScriptedBackend::ScriptedBackend(Responder responder, std::size_t max_concurrent)
    : ScriptedBackend(ScriptedFixture{}, std::move(responder), max_concurrent) {}

ChatResponse ScriptedBackend::do_complete(const ChatRequest& request) {
  auto respond = [&](const ScriptRule& rule) -> ChatResponse {
    if (rule.error) {
      if (*rule.error == ErrorCode::HttpStatus) {
        fail(ErrorCode::HttpStatus, "scripted status " + std::to_string(rule.status),
             static_cast<std::size_t>(rule.status));
      }
      fail(*rule.error, "scripted failure");
    }
    return ChatResponse{rule.response, std::chrono::milliseconds{0}, id(), 0};
  };

  const auto hash = prompt_hash(request);
  for (const auto& rule : fixture_.rules) {
    if (rule.prompt_hash && *rule.prompt_hash == hash) return respond(rule);
  }
  const std::string haystack = request.system_prompt + "\n" + request.user_prompt;
  for (const auto& rule : fixture_.rules) {
    if (rule.prompt_contains && haystack.find(*rule.prompt_contains) != std::string::npos) return respond(rule);
  }
  if (responder_) {
    if (auto text = responder_(request)) return ChatResponse{std::move(*text), std::chrono::milliseconds{0}, id(), 0};
  }
  if (fixture_.default_response) return ChatResponse{*fixture_.default_response, std::chrono::milliseconds{0}, id(), 0};
  fail(ErrorCode::InvalidArgument, "no scripted response for prompt " + hash);
}

// ---------------------------------------------------------------------------
// Batches

std::vector<BatchItem> complete_batch(ChatBackend& backend, const std::vector<ChatRequest>& requests) {
  require(!requests.empty(), "complete_batch needs at least one request");

  std::vector<std::optional<BatchItem>> slots(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        slots[i] = BatchItem{i, backend.complete(requests[i])};
      } catch (const Error& e) {
        slots[i] = BatchItem{i, e};
      } catch (const std::exception& e) {
        slots[i] = BatchItem{i, Error(ErrorCode::Transport, e.what())};
      }
    }
  };

  const std::size_t workers = std::min(backend.max_concurrent(), requests.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  std::vector<BatchItem> out;
  out.reserve(requests.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace llmrerank
