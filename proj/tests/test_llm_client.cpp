#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "llmrerank/error.hpp"
#include "llmrerank/llm_client.hpp"
#include "llmrerank/stub_server.hpp"

using namespace llmrerank;
using namespace std::chrono_literals;

namespace {

ChatRequest request(std::string user, std::string system = "You rank things.") {
  ChatRequest r;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  return r;
}

BackendConfig http_config(const StubChatServer& server) {
  BackendConfig c;
  c.kind = BackendKind::Http;
  c.endpoint = server.endpoint();
  c.model = "test-model";
  c.timeout = 2000ms;
  c.backoff_base = 1ms;
  c.backoff_max = 5ms;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("requests") {
  TEST_CASE("validation") {
    CHECK_NOTHROW(validate_request(request("x")));
    CHECK(code_of([] { validate_request(request("")); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { validate_request(request("x", " ")); }) == ErrorCode::InvalidArgument);
    auto r = request("x");
    r.temperature = -0.1;
    CHECK(code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
    r.temperature = std::nan("");
    CHECK(code_of([&] { validate_request(r); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("prompt hash depends on both prompts only") {
    auto a = request("hello");
    auto b = request("hello");
    b.temperature = 0.0;
    CHECK(prompt_hash(a) == prompt_hash(b));
    CHECK(prompt_hash(a) != prompt_hash(request("hello", "other")));
    CHECK(prompt_hash(a).size() == 16);
  }

  TEST_CASE("backend config validation") {
    BackendConfig c;
    CHECK_NOTHROW(validate_backend_config(c));
    c.kind = BackendKind::Http;
    CHECK(code_of([&] { validate_backend_config(c); }) == ErrorCode::Config);
    c.endpoint = "http://localhost:1/v1/chat/completions";
    CHECK(code_of([&] { validate_backend_config(c); }) == ErrorCode::Config);
    c.model = "m";
    CHECK_NOTHROW(validate_backend_config(c));
    c.timeout = 0ms;
    CHECK(code_of([&] { validate_backend_config(c); }) == ErrorCode::Config);
  }

  TEST_CASE("url parsing") {
    const auto u = parse_url("http://127.0.0.1:8080/v1/chat/completions");
    CHECK(u.scheme == "http");
    CHECK(u.host == "127.0.0.1");
    CHECK(u.port == 8080);
    CHECK(u.path == "/v1/chat/completions");
    CHECK(parse_url("https://api.example.com/v1/chat").port == 443);
    CHECK(parse_url("http://host").path == "/");
    CHECK(code_of([] { parse_url("ftp://x/"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_url("http://:80/"); }) == ErrorCode::Config);
  }

  TEST_CASE("wire format") {
    auto r = request("rank these");
    r.seed = 5;
    const auto body = build_chat_body("m1", r);
    CHECK(body.find("\"model\":\"m1\"") != std::string::npos);
    CHECK(body.find("\"role\":\"system\"") != std::string::npos);
    CHECK(body.find("\"content\":\"rank these\"") != std::string::npos);
    CHECK(body.find("\"seed\":5") != std::string::npos);
    CHECK(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"Rank 1: 7 - ok"}}]})") ==
          "Rank 1: 7 - ok");
    CHECK(code_of([] { parse_chat_response("{}"); }) == ErrorCode::Transport);
    CHECK(code_of([] { parse_chat_response("not json"); }) == ErrorCode::Transport);
  }
}

TEST_SUITE("scripted backend") {
  TEST_CASE("fixture keyed by prompt hash") {
    const auto req = request("candidates...");
    const auto fixture = ScriptedFixture::from_jsonl("{\"prompt_hash\":\"" + prompt_hash(req) +
                                                     "\",\"response\":\"Rank 1: 7 - fits taste\"}\n");
    ScriptedBackend backend(fixture);
    CHECK(backend.complete(req).text == "Rank 1: 7 - fits taste");
    CHECK(backend.requests_issued() == 1);
    CHECK(backend.complete(req).backend_id == "scripted");
  }

  TEST_CASE("contains rules, default and simulated failures") {
    const auto fixture = ScriptedFixture::from_jsonl(
        "{\"prompt_contains\":\"alpha\",\"response\":\"A\"}\n"
        "{\"prompt_contains\":\"slow\",\"error\":\"timeout\"}\n"
        "{\"prompt_contains\":\"busy\",\"status\":503}\n"
        "{\"default\":\"D\"}\n");
    ScriptedBackend backend(fixture);
    CHECK(backend.complete(request("has alpha inside")).text == "A");
    CHECK(backend.complete(request("nothing")).text == "D");
    CHECK(code_of([&] { backend.complete(request("slow one")); }) == ErrorCode::Timeout);
    try {
      backend.complete(request("busy"));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HttpStatus);
      CHECK(e.detail() == 503);
    }
  }

  TEST_CASE("responder fallback and unmatched prompts") {
    ScriptedBackend backend(ScriptedFixture{}, [](const ChatRequest& r) -> std::optional<std::string> {
      if (r.user_prompt == "echo") return "echoed";
      return std::nullopt;
    });
    CHECK(backend.complete(request("echo")).text == "echoed");
    CHECK(code_of([&] { backend.complete(request("other")); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("malformed fixture lines") {
    CHECK(code_of([] { ScriptedFixture::from_jsonl("{\"response\":\"x\"}\n"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { ScriptedFixture::from_jsonl("oops\n"); }) == ErrorCode::MalformedRow);
  }

  TEST_CASE("batches are aligned and bit-identical across runs") {
    ScriptedBackend backend([](const ChatRequest& r) -> std::optional<std::string> { return "re:" + r.user_prompt; }, 2);
    std::vector<ChatRequest> reqs;
    for (int i = 0; i < 20; ++i) reqs.push_back(request("p" + std::to_string(i)));
    const auto a = complete_batch(backend, reqs);
    const auto b = complete_batch(backend, reqs);
    REQUIRE(a.size() == 20);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].index == i);
      CHECK(a[i].response().text == "re:p" + std::to_string(i));
      CHECK(a[i].response().text == b[i].response().text);
    }
    CHECK(code_of([&] { complete_batch(backend, {}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("in-flight requests never exceed the cap") {
    std::atomic<int> in_flight{0}, peak{0};
    ScriptedBackend backend(
        [&](const ChatRequest&) -> std::optional<std::string> {
          const int now = ++in_flight;
          int seen = peak.load();
          while (now > seen && !peak.compare_exchange_weak(seen, now)) {
          }
          std::this_thread::sleep_for(2ms);
          --in_flight;
          return "ok";
        },
        3);
    std::vector<ChatRequest> reqs(30, request("x"));
    complete_batch(backend, reqs);
    CHECK(peak.load() <= 3);
    CHECK(peak.load() >= 2);
  }
}

TEST_SUITE("http backend") {
  TEST_CASE("three requests succeed in input order") {
    StubChatServer server({{"one", "1"}, {"two", "2"}, {"three", "3"}});
    server.start();
    HttpBackend backend(http_config(server));
    const auto results = complete_batch(backend, {request("one"), request("two"), request("three")});
    REQUIRE(results.size() == 3);
    CHECK(results[0].response().text == "1");
    CHECK(results[1].response().text == "2");
    CHECK(results[2].response().text == "3");
    CHECK(results[0].response().backend_id == "http:test-model");
  }

  TEST_CASE("429 twice then 200 succeeds with two retries") {
    StubRule rule{"flaky", "finally", 2, 429, 0};
    StubChatServer server({rule});
    server.start();
    HttpBackend backend(http_config(server));
    const auto resp = backend.complete(request("flaky"));
    CHECK(resp.text == "finally");
    CHECK(resp.retry_count == 2);
    CHECK(server.requests() == 3);
  }

  TEST_CASE("retries are bounded") {
    StubRule rule{"down", "never", 100, 500, 0};
    StubChatServer server({rule});
    server.start();
    auto cfg = http_config(server);
    cfg.max_retries = 2;
    HttpBackend backend(cfg);
    CHECK(code_of([&] { backend.complete(request("down")); }) == ErrorCode::ExhaustedRetries);
    CHECK(server.requests() == 3);
  }

  TEST_CASE("client errors are not retried") {
    StubChatServer server(std::vector<StubRule>{{"known", "x"}});
    server.start();
    HttpBackend backend(http_config(server));
    try {
      backend.complete(request("mystery prompt"));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HttpStatus);
      CHECK(e.detail() == 404);
    }
    CHECK(server.requests() == 1);
  }

  TEST_CASE("one timeout with max_retries 0 is a Timeout") {
    StubRule rule{"slow", "late", 0, 500, 600};
    StubChatServer server({rule});
    server.start();
    auto cfg = http_config(server);
    cfg.max_retries = 0;
    cfg.timeout = 150ms;
    HttpBackend backend(cfg);
    CHECK(code_of([&] { backend.complete(request("slow")); }) == ErrorCode::Timeout);
  }

  TEST_CASE("a permanent failure stays isolated in its batch slot") {
    StubRule broken{"second", "x", 1000, 400, 0};
    StubChatServer server({{"first", "a"}, broken, {"third", "c"}});
    server.start();
    HttpBackend backend(http_config(server));
    const auto results = complete_batch(backend, {request("first"), request("second"), request("third")});
    CHECK(results[0].ok());
    REQUIRE_FALSE(results[1].ok());
    CHECK(results[1].error().code() == ErrorCode::HttpStatus);
    CHECK(results[2].response().text == "c");
  }

  TEST_CASE("max_concurrent_requests = 1 is observed by the server") {
    StubRule rule{"req", "ok", 0, 500, 20};
    StubChatServer server({rule});
    server.start();
    auto cfg = http_config(server);
    cfg.max_concurrent_requests = 1;
    HttpBackend backend(cfg);
    std::vector<ChatRequest> reqs(6, request("req"));
    const auto results = complete_batch(backend, reqs);
    for (const auto& r : results) CHECK(r.ok());
    CHECK(server.max_in_flight() == 1);
  }

  TEST_CASE("the server sees concurrency when the cap allows it") {
    StubRule rule{"req", "ok", 0, 500, 50};
    StubChatServer server({rule});
    server.start();
    auto cfg = http_config(server);
    cfg.max_concurrent_requests = 4;
    HttpBackend backend(cfg);
    complete_batch(backend, std::vector<ChatRequest>(8, request("req")));
    CHECK(server.max_in_flight() > 1);
    CHECK(server.max_in_flight() <= 4);
  }

  TEST_CASE("api key comes from the environment only") {
    StubChatServer server(std::vector<StubRule>{{"x", "y"}});
    server.start();
    auto cfg = http_config(server);
    cfg.api_key_env = "LLMRERANK_TEST_KEY_UNSET";
    ::unsetenv("LLMRERANK_TEST_KEY_UNSET");
    CHECK(code_of([&] { HttpBackend b(cfg); }) == ErrorCode::MissingApiKey);
    ::setenv("LLMRERANK_TEST_KEY_UNSET", "sk-secret", 1);
    HttpBackend backend(cfg);
    CHECK(backend.complete(request("x")).text == "y");
    CHECK(build_chat_body("m", request("x")).find("sk-secret") == std::string::npos);
    ::unsetenv("LLMRERANK_TEST_KEY_UNSET");
  }

  TEST_CASE("connection refused is a transport failure") {
    int port = 0;
    {
      StubChatServer server(std::vector<StubRule>{});
      port = server.start();
    }
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "m";
    cfg.max_retries = 0;
    cfg.timeout = 500ms;
    HttpBackend backend(cfg);
    const auto code = code_of([&] { backend.complete(request("x")); });
    CHECK((code == ErrorCode::Transport || code == ErrorCode::Timeout));
  }
}

TEST_CASE("stub fixture format") {
  const auto rules = stub_rules_from_jsonl(
      "{\"prompt_contains\":\"a\",\"response\":\"b\"}\n{\"prompt_contains\":\"c\",\"response\":\"d\",\"fail_first\":2,"
      "\"fail_status\":429,\"delay_ms\":5}\n");
  REQUIRE(rules.size() == 2);
  CHECK(rules[1].fail_first == 2);
  CHECK(rules[1].fail_status == 429);
  CHECK(rules[1].delay_ms == 5);
}
