#include "coldrec/gateway.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "coldrec/error.hpp"

namespace coldrec {

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::ConfigError, "request " + request_tag + " has no messages");
  for (const auto& m : messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw Error(ErrorCode::ConfigError, "unknown role '" + m.role + "'");
    }
  }
  if (messages.front().role == "assistant") {
    throw Error(ErrorCode::ConfigError, "first message must be system or user");
  }
  if (temperature < 0.0) throw Error(ErrorCode::ConfigError, "negative temperature");
  if (max_tokens <= 0) throw Error(ErrorCode::ConfigError, "max_tokens must be positive");
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  {
    std::lock_guard lock(mutex_);
    calls_.push_back(request.request_tag);
  }
  ChatResponse response;
  response.request_tag = request.request_tag;
  response.finish_reason = "stop";
  if (auto it = responses_.find(request.request_tag); it != responses_.end()) {
    response.content = it->second;
  } else if (fallback_) {
    response.content = *fallback_;
  } else {
    throw Error(ErrorCode::UnknownTag, request.request_tag);
  }
  return response;
}

std::vector<std::string> MockBackend::call_log() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::shared_ptr<MockBackend> parse_mock_script(std::string_view text) {
  if (trim(text).empty()) return std::make_shared<MockBackend>();
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigError, "mock script is not a JSON object");
  std::map<std::string, std::string> responses;
  std::optional<std::string> fallback;
  try {
    if (j.contains("responses")) responses = j.at("responses").get<std::map<std::string, std::string>>();
    if (j.contains("default") && !j.at("default").is_null()) fallback = j.at("default").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("mock script: ") + e.what());
  }
  // Scripts written as plain tag maps may carry the fallback under __default__.
  if (auto it = responses.find("__default__"); it != responses.end()) {
    if (!fallback) fallback = it->second;
    responses.erase(it);
  }
  return std::make_shared<MockBackend>(std::move(responses), std::move(fallback));
}

std::shared_ptr<MockBackend> load_mock_script(const std::string& path) {
  return parse_mock_script(read_file(path));
}

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  const auto scheme_end = base_url.find("://");
  const auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
  if (origin_.empty()) throw Error(ErrorCode::ConfigError, "empty base URL");
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  nlohmann::json body;
  body["model"] = request.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;

  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto started = std::chrono::steady_clock::now();
  auto result = client.Post(path_prefix_ + "/v1/chat/completions", headers,
                            body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                            "application/json");
  const auto elapsed = std::chrono::steady_clock::now() - started;
  if (!result) {
    throw Error(ErrorCode::TransportError, request.request_tag + ": " + httplib::to_string(result.error()));
  }
  if (result->status != 200) throw BadStatusError(result->status, request.request_tag);

  auto j = nlohmann::json::parse(result->body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::EmptyChoice, request.request_tag + ": response is not JSON");
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::EmptyChoice, request.request_tag);
  }
  const auto& first = (*choices)[0];
  ChatResponse response;
  response.request_tag = request.request_tag;
  response.finish_reason = first.value("finish_reason", std::string());
  if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string()) {
    response.content = first["message"]["content"].get<std::string>();
  } else if (response.finish_reason == "stop" || response.finish_reason.empty()) {
    throw Error(ErrorCode::EmptyChoice, request.request_tag + ": no content");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    response.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    response.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  return response;
}

std::chrono::milliseconds RetryPolicy::delay(int attempt, double unit) const {
  const double nominal = static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt);
  const double factor = 1.0 + jitter * (2.0 * unit - 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(nominal * factor)));
}

bool is_retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw Error(ErrorCode::ConfigError, "gateway needs a backend");
  if (options_.max_concurrency == 0) throw Error(ErrorCode::ConfigError, "max_concurrency must be >= 1");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::acquire() {
  std::unique_lock lock(mutex_);
  slot_freed_.wait(lock, [&] { return in_flight_ < options_.max_concurrency; });
  ++in_flight_;
  high_water_ = std::max(high_water_, in_flight_);
}

void Gateway::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slot_freed_.notify_one();
}

double Gateway::next_jitter_unit() {
  std::lock_guard lock(mutex_);
  return jitter_rng_.unit();
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  CallRecord record{request.request_tag, 0, false, {}};
  auto finish = [&](CallRecord r) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(r));
  };

  for (int attempt = 0;; ++attempt) {
    ++record.attempts;
    bool retryable = false;
    std::exception_ptr failure;
    acquire();
    try {
      ChatResponse response = backend_->complete(request);
      release();
      response.request_tag = request.request_tag;
      response.retry_count = attempt;
      record.ok = true;
      finish(record);
      return response;
    } catch (const BadStatusError& e) {
      release();
      retryable = is_retryable_status(e.status());
      record.error = e.what();
      failure = std::current_exception();
    } catch (const Error& e) {
      release();
      retryable = e.code() == ErrorCode::TransportError;
      record.error = e.what();
      failure = std::current_exception();
    } catch (...) {
      release();
      finish(record);
      throw;
    }

    if (!retryable) {
      finish(record);
      std::rethrow_exception(failure);
    }
    if (attempt >= options_.retry.max_retries) {
      finish(record);
      throw Error(ErrorCode::TransportError, request.request_tag + ": giving up after " +
                                                 std::to_string(record.attempts) + " attempts (" + record.error + ")");
    }
    options_.sleep(options_.retry.delay(attempt, next_jitter_unit()));
  }
}

std::size_t Gateway::in_flight_high_water() const {
  std::lock_guard lock(mutex_);
  return high_water_;
}

std::vector<CallRecord> Gateway::call_records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

}  // namespace coldrec
