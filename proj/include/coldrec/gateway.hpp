#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "coldrec/util.hpp"

namespace coldrec {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  /// `{task_id}/{strategy}/{ordinal}`; the mock backend keys on it.
  std::string request_tag;

  /// Throws ConfigError when messages are empty, a role is unknown, or the
  /// first message is an assistant turn.
  void validate() const;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::int64_t latency_ms = 0;
  std::string request_tag;
  int retry_count = 0;
};

/// One attempt against a chat-completion service. Implementations throw
/// Error(TransportError) for connection problems and BadStatusError for
/// non-200 replies; Gateway decides what to retry.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Answers from a tag -> text script. Safe for concurrent use.
class MockBackend final : public ChatBackend {
 public:
  MockBackend() = default;
  MockBackend(std::map<std::string, std::string> responses, std::optional<std::string> fallback)
      : responses_(std::move(responses)), fallback_(std::move(fallback)) {}

  ChatResponse complete(const ChatRequest& request) override;

  /// Tags in the order requests arrived.
  std::vector<std::string> call_log() const;
  std::size_t call_count() const;

 private:
  std::map<std::string, std::string> responses_;
  std::optional<std::string> fallback_;
  mutable std::mutex mutex_;
  std::vector<std::string> calls_;
};

/// `{"responses": {"<tag>": "<text>"}, "default": "<text>"}`; an empty
/// file yields a backend that rejects every tag.
std::shared_ptr<MockBackend> load_mock_script(const std::string& path);
std::shared_ptr<MockBackend> parse_mock_script(std::string_view text);

/// OpenAI-compatible `POST {base_url}/v1/chat/completions`.
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key,
              std::chrono::seconds timeout = std::chrono::seconds(120));

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::string origin_;
  std::string path_prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

struct RetryPolicy {
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  double jitter = 0.2;
  int max_retries = 4;

  /// Nominal delay before retry number `attempt` (0-based), jitter applied
  /// with `unit` drawn from [0, 1).
  std::chrono::milliseconds delay(int attempt, double unit) const;
};

struct GatewayOptions {
  std::size_t max_concurrency = 4;
  RetryPolicy retry;
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct CallRecord {
  std::string request_tag;
  int attempts = 0;
  bool ok = false;
  std::string error;
};

/// Shared front door to a backend: validates requests, caps in-flight
/// calls at max_concurrency and retries 429/5xx/transport failures with
/// exponential backoff.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

  ChatResponse complete(const ChatRequest& request);

  std::size_t in_flight_high_water() const;
  std::vector<CallRecord> call_records() const;

 private:
  void acquire();
  void release();
  double next_jitter_unit();

  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;

  mutable std::mutex mutex_;
  std::condition_variable slot_freed_;
  std::size_t in_flight_ = 0;
  std::size_t high_water_ = 0;
  std::vector<CallRecord> records_;
  DeterministicRng jitter_rng_{0x6a09e667f3bcc909ULL};
};

bool is_retryable_status(int status);

}  // namespace coldrec
