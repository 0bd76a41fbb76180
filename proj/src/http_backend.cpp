#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "llmrerank/llm_client.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

namespace {

bool transient_status(int status) { return status == 429 || status >= 500; }

struct Attempt {
  std::optional<ChatResponse> response;
  std::optional<Error> error;
  bool transient = false;
};

}  // namespace

ParsedUrl parse_url(std::string_view url) {
  ParsedUrl out;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) fail(ErrorCode::Config, "endpoint '" + std::string(url) + "' lacks a scheme");
  out.scheme = text::to_lower(url.substr(0, scheme_end));
  if (out.scheme != "http" && out.scheme != "https") fail(ErrorCode::Config, "unsupported scheme " + out.scheme);
  auto rest = url.substr(scheme_end + 3);
  const auto path_start = rest.find('/');
  auto authority = rest.substr(0, path_start);
  out.path = path_start == std::string_view::npos ? "/" : std::string(rest.substr(path_start));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    const auto port_text = authority.substr(colon + 1);
    try {
      out.port = std::stoi(std::string(port_text));
    } catch (const std::exception&) {
      fail(ErrorCode::Config, "bad port in endpoint '" + std::string(url) + "'");
    }
    authority = authority.substr(0, colon);
  } else {
    out.port = out.scheme == "https" ? 443 : 80;
  }
  if (authority.empty()) fail(ErrorCode::Config, "endpoint '" + std::string(url) + "' has no host");
  out.host = std::string(authority);
  return out;
}

std::string build_chat_body(const std::string& model, const ChatRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", request.system_prompt}},
      {{"role", "user"}, {"content", request.user_prompt}},
  });
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) fail(ErrorCode::Transport, "choices[0].message.content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Transport, std::string("malformed chat response: ") + e.what());
  }
}

HttpBackend::HttpBackend(BackendConfig config)
    : ChatBackend(config.max_concurrent_requests), config_(std::move(config)) {
  config_.kind = BackendKind::Http;
  validate_backend_config(config_);
  url_ = parse_url(config_.endpoint);
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      fail(ErrorCode::MissingApiKey, "environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
  }
}

ChatResponse HttpBackend::do_complete(const ChatRequest& request) {
  const std::string body = build_chat_body(config_.model, request);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto attempt_once = [&]() -> Attempt {
    // One client per attempt: the backend is shared across threads.
    httplib::Client client(url_.scheme + "://" + url_.host + ":" + std::to_string(url_.port));
    const auto t = config_.timeout;
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(t);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(t - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path, headers, body, "application/json");
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        return {std::nullopt, Error(ErrorCode::Timeout, "no response within " + std::to_string(t.count()) + " ms"), true};
      }
      return {std::nullopt, Error(ErrorCode::Transport, "request failed: " + httplib::to_string(err)), true};
    }
    if (res->status != 200) {
      return {std::nullopt,
              Error(ErrorCode::HttpStatus, "HTTP " + std::to_string(res->status), static_cast<std::size_t>(res->status)),
              transient_status(res->status)};
    }
    return {ChatResponse{parse_chat_response(res->body), latency, id(), 0}, std::nullopt, false};
  };

  for (std::size_t attempt = 0;; ++attempt) {
    auto result = attempt_once();
    if (result.response) {
      result.response->retry_count = attempt;
      return std::move(*result.response);
    }
    if (!result.transient) throw std::move(*result.error);
    if (attempt >= config_.max_retries) {
      if (config_.max_retries == 0) throw std::move(*result.error);
      fail(ErrorCode::ExhaustedRetries,
           std::to_string(attempt + 1) + " attempts failed; last: " + std::string(result.error->what()));
    }
    auto delay = config_.backoff_base * (1LL << std::min<std::size_t>(attempt, 20));
    if (delay > config_.backoff_max) delay = config_.backoff_max;
    std::this_thread::sleep_for(delay);
  }
}

std::unique_ptr<ChatBackend> make_http_backend(const BackendConfig& config) {
  return std::make_unique<HttpBackend>(config);
}

}  // namespace llmrerank
