#include "llmrerank/stub_server.hpp"

#include <chrono>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "llmrerank/error.hpp"
#include "llmrerank/text.hpp"

namespace llmrerank {

struct StubChatServer::Impl {
  httplib::Server server;
};

std::vector<StubRule> stub_rules_from_jsonl(std::string_view content) {
  std::vector<StubRule> rules;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = text::trim(content.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      StubRule rule;
      rule.prompt_contains = j.at("prompt_contains").get<std::string>();
      rule.response = j.value("response", "");
      rule.fail_first = j.value("fail_first", std::size_t{0});
      rule.fail_status = j.value("fail_status", 500);
      rule.delay_ms = j.value("delay_ms", 0);
      rules.push_back(std::move(rule));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedRow, "stub fixture line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return rules;
}

StubChatServer::StubChatServer(std::vector<StubRule> rules)
    : impl_(std::make_unique<Impl>()), rules_(std::move(rules)), hits_(rules_.size(), 0) {}

StubChatServer::~StubChatServer() { stop(); }

std::string StubChatServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

int StubChatServer::start() {
  impl_->server.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto now = ++in_flight_;
    auto peak = max_in_flight_.load();
    while (now > peak && !max_in_flight_.compare_exchange_weak(peak, now)) {
    }
    ++requests_;

    std::string haystack;
    try {
      const auto j = nlohmann::json::parse(req.body);
      for (const auto& m : j.at("messages")) haystack += m.at("content").get<std::string>() + "\n";
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      --in_flight_;
      return;
    }

    const StubRule* matched = nullptr;
    bool failing = false;
    {
      std::lock_guard lock(hits_mutex_);
      for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (haystack.find(rules_[i].prompt_contains) != std::string::npos) {
          matched = &rules_[i];
          failing = hits_[i]++ < rules_[i].fail_first;
          break;
        }
      }
    }
    if (matched != nullptr && matched->delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(matched->delay_ms));
    }
    if (matched == nullptr) {
      res.status = 404;
    } else if (failing) {
      res.status = matched->fail_status;
    } else {
      nlohmann::json body;
      body["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", matched->response}}}}});
      res.set_content(body.dump(), "application/json");
    }
    --in_flight_;
  });

  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) fail(ErrorCode::IoError, "stub server could not bind");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void StubChatServer::stop() {
  if (thread_.joinable()) {
    impl_->server.stop();
    thread_.join();
  }
}

}  // namespace llmrerank
