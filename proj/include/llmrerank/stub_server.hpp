#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace llmrerank {

/// One line of the stub-server fixture (JSONL):
/// {"prompt_contains", "response", "fail_first"?, "fail_status"?, "delay_ms"?}
struct StubRule {
  std::string prompt_contains;
  std::string response;
  /// The first `fail_first` matching requests answer `fail_status`.
  std::size_t fail_first = 0;
  int fail_status = 500;
  int delay_ms = 0;
};

std::vector<StubRule> stub_rules_from_jsonl(std::string_view content);

/// Local chat-completions server for tests and offline demos. Matches the
/// concatenated message contents against rules in order; unmatched requests
/// get 404. Records the peak number of concurrently handled requests.
class StubChatServer {
 public:
  explicit StubChatServer(std::vector<StubRule> rules);
  ~StubChatServer();
  StubChatServer(const StubChatServer&) = delete;
  StubChatServer& operator=(const StubChatServer&) = delete;

  /// Binds 127.0.0.1 on a free port and serves in a background thread.
  int start();
  void stop();

  int port() const noexcept { return port_; }
  std::string endpoint() const;
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<StubRule> rules_;
  std::vector<std::size_t> hits_;
  std::mutex hits_mutex_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::atomic<std::size_t> requests_{0};
};

}  // namespace llmrerank
