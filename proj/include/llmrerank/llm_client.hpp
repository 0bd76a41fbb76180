#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "llmrerank/error.hpp"

namespace llmrerank {

inline constexpr double kInferenceTemperature = 0.7;
inline constexpr double kDatasetTemperature = 0.0;

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = kInferenceTemperature;
  std::size_t max_tokens = 1024;
  std::optional<std::int64_t> seed;
};

/// Throws InvalidArgument for empty prompts or a negative / non-finite temperature.
void validate_request(const ChatRequest& request);

/// Stable key of the prompt pair, used by scripted fixtures.
std::string prompt_hash(const ChatRequest& request);

struct ChatResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
  std::size_t retry_count = 0;
};

enum class BackendKind { Scripted, Http };

struct BackendConfig {
  BackendKind kind = BackendKind::Scripted;
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  /// Name of the environment variable holding the key; empty sends no key.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_retries = 3;
  std::size_t max_concurrent_requests = 4;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_max{8000};
};

/// Throws Config when Http lacks endpoint/model or the timeout is not positive.
void validate_backend_config(const BackendConfig& config);

/// Shared by concurrent callers. complete() blocks while
/// max_concurrent requests are already in flight.
class ChatBackend {
 public:
  explicit ChatBackend(std::size_t max_concurrent);
  virtual ~ChatBackend() = default;
  ChatBackend(const ChatBackend&) = delete;
  ChatBackend& operator=(const ChatBackend&) = delete;

  ChatResponse complete(const ChatRequest& request);

  std::size_t max_concurrent() const noexcept { return max_concurrent_; }
  std::size_t requests_issued() const noexcept { return requests_.load(); }
  virtual std::string id() const = 0;

 protected:
  virtual ChatResponse do_complete(const ChatRequest& request) = 0;

 private:
  std::size_t max_concurrent_;
  std::size_t in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable slot_free_;
  std::atomic<std::size_t> requests_{0};
};

// ---------------------------------------------------------------------------
// Scripted backend

/// One fixture line. Matching order: prompt_hash, then prompt_contains
/// (against system + "\n" + user prompt), in file order.
struct ScriptRule {
  std::optional<std::string> prompt_hash;
  std::optional<std::string> prompt_contains;
  std::string response;
  /// Simulated failure instead of a response.
  std::optional<ErrorCode> error;
  int status = 0;
};

struct ScriptedFixture {
  std::vector<ScriptRule> rules;
  std::optional<std::string> default_response;

  /// JSONL lines: {"prompt_hash"|"prompt_contains", "response"} or
  /// {"default": text}; failures as {"prompt_contains", "error": "timeout"}
  /// or {"prompt_contains", "status": 500}. Throws MalformedRow.
  static ScriptedFixture from_jsonl(std::string_view content);
};

/// Programmatic fallback consulted after the fixture rules.
using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedFixture fixture, Responder responder = {}, std::size_t max_concurrent = 4);
  explicit ScriptedBackend(Responder responder, std::size_t max_concurrent = 4);

  std::string id() const override { return "scripted"; }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  ScriptedFixture fixture_;
  Responder responder_;
};

// ---------------------------------------------------------------------------
// HTTP backend (chat-completions JSON protocol)

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;
};

/// Throws Config on anything but http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

/// Request body: {model, messages:[system,user], temperature, max_tokens[, seed]}.
std::string build_chat_body(const std::string& model, const ChatRequest& request);
/// Extracts choices[0].message.content. Throws Transport.
std::string parse_chat_response(std::string_view body);

class HttpBackend final : public ChatBackend {
 public:
  /// Throws MissingApiKey when api_key_env names an unset variable.
  explicit HttpBackend(BackendConfig config);

  std::string id() const override { return "http:" + config_.model; }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  BackendConfig config_;
  ParsedUrl url_;
  std::string api_key_;
};

std::unique_ptr<ChatBackend> make_http_backend(const BackendConfig& config);

// ---------------------------------------------------------------------------
// Batches

struct BatchItem {
  std::size_t index = 0;
  std::variant<ChatResponse, Error> result;

  bool ok() const noexcept { return result.index() == 0; }
  const ChatResponse& response() const { return std::get<ChatResponse>(result); }
  const Error& error() const { return std::get<Error>(result); }
};

/// Results in input order; per-item failures are carried, never thrown.
/// Throws InvalidArgument on an empty list.
std::vector<BatchItem> complete_batch(ChatBackend& backend, const std::vector<ChatRequest>& requests);

}  // namespace llmrerank
