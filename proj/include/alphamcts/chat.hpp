#pragma once

#include <chrono>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "alphamcts/error.hpp"

namespace alphamcts {

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  std::string kind;  ///< request purpose; recorded in traffic logs, not sent
};

struct ChatResponse {
  std::string content;
};

/// OpenAI-compatible request body.
inline nlohmann::ordered_json chat_body(const ChatRequest& r) {
  nlohmann::ordered_json body;
  body["model"] = r.model;
  auto msgs = nlohmann::ordered_json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = msgs;
  body["temperature"] = r.temperature;
  return body;
}

inline nlohmann::ordered_json request_record(const ChatRequest& r) {
  auto j = chat_body(r);
  j["kind"] = r.kind;
  return j;
}

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct HttpSettings {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
};

/// Plain HTTP(S) client for a chat-completions endpoint.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpSettings s) : settings_(std::move(s)) {
    const auto& url = settings_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.rfind("https://", 0) == 0) throw ConfigError("this build has no TLS support; use an http:// endpoint");
#endif
  }

  ChatResponse complete(const ChatRequest& request) override {
    httplib::Client client(origin_);
    client.set_connection_timeout(settings_.timeout_seconds, 0);
    client.set_read_timeout(settings_.timeout_seconds, 0);
    client.set_write_timeout(settings_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!settings_.api_key_env.empty())
      if (const char* key = std::getenv(settings_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    const auto res = client.Post(path_, headers, chat_body(request).dump(), "application/json");
    if (!res) throw TransportError("request to " + origin_ + " failed: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500)
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status), true);
    if (res->status != 200)
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300),
                           false);
    try {
      const auto body = nlohmann::json::parse(res->body);
      return {body.at("choices").at(0).at("message").at("content").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion body: ") + e.what(), false);
    }
  }

 private:
  HttpSettings settings_;
  std::string origin_;
  std::string path_;
};

struct RetryPolicy {
  int max_attempts = 4;
  int base_delay_ms = 500;
  double multiplier = 2.0;
};

/// Retries transient failures with exponential backoff; gives up with
/// GeneratorUnavailable.
class RetryingTransport : public ChatTransport {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingTransport(std::shared_ptr<ChatTransport> inner, RetryPolicy policy,
                    Sleeper sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}

  ChatResponse complete(const ChatRequest& request) override {
    double delay = policy_.base_delay_ms;
    for (int attempt = 1;; ++attempt) {
      try {
        return inner_->complete(request);
      } catch (const TransportError& e) {
        if (!e.transient() || attempt >= policy_.max_attempts)
          throw GeneratorUnavailable("chat endpoint unavailable after " + std::to_string(attempt) +
                                     " attempt(s): " + e.what());
        sleep_(std::chrono::milliseconds(static_cast<long long>(delay)));
        delay *= policy_.multiplier;
      }
    }
  }

 private:
  std::shared_ptr<ChatTransport> inner_;
  RetryPolicy policy_;
  Sleeper sleep_;
};

/// Appends every exchange to a JSONL log: {"request": ..., "response": "..."}.
class RecordingTransport : public ChatTransport {
 public:
  RecordingTransport(std::shared_ptr<ChatTransport> inner, const std::filesystem::path& log)
      : inner_(std::move(inner)), out_(log, std::ios::app) {
    if (!out_) throw Error("cannot open traffic log " + log.string());
  }

  ChatResponse complete(const ChatRequest& request) override {
    auto res = inner_->complete(request);
    nlohmann::ordered_json line;
    line["request"] = request_record(request);
    line["response"] = res.content;
    std::lock_guard lock(mu_);
    out_ << line.dump() << '\n';
    out_.flush();
    return res;
  }

 private:
  std::shared_ptr<ChatTransport> inner_;
  std::ofstream out_;
  std::mutex mu_;
};

/// Serves responses from a recorded log, in order, checking that each
/// request matches the one recorded.
class ReplayTransport : public ChatTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& log) {
    std::ifstream in(log);
    if (!in) throw Error("cannot open traffic log " + log.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        auto j = nlohmann::ordered_json::parse(line);
        records_.push_back({j.at("request"), j.at("response").get<std::string>()});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad traffic record: ") + e.what(), n);
      }
    }
  }

  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    if (cursor_ >= records_.size())
      throw ReplayMismatch("replay log exhausted after " + std::to_string(records_.size()) + " exchanges");
    const auto& rec = records_[cursor_];
    const auto got = request_record(request);
    if (got != rec.request)
      throw ReplayMismatch("request " + std::to_string(cursor_ + 1) + " (" + request.kind +
                           ") differs from the recorded one");
    ++cursor_;
    return {rec.response};
  }

  std::size_t consumed() const { return cursor_; }
  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    nlohmann::ordered_json request;
    std::string response;
  };
  std::vector<Record> records_;
  std::size_t cursor_ = 0;
  std::mutex mu_;
};

/// Sends requests with at most `max_in_flight` outstanding; results keep
/// the input order.
inline std::vector<ChatResponse> complete_batch(ChatTransport& transport, const std::vector<ChatRequest>& requests,
                                                std::size_t max_in_flight) {
  std::vector<ChatResponse> out(requests.size());
  std::deque<std::pair<std::size_t, std::future<ChatResponse>>> pending;
  auto drain_one = [&] {
    auto [idx, fut] = std::move(pending.front());
    pending.pop_front();
    out[idx] = fut.get();
  };
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (pending.size() >= std::max<std::size_t>(1, max_in_flight)) drain_one();
    pending.emplace_back(i, std::async(std::launch::async, [&transport, &requests, i] {
                           return transport.complete(requests[i]);
                         }));
  }
  while (!pending.empty()) drain_one();
  return out;
}

/// Pulls the first JSON object out of a model reply (code fences and prose
/// around it are ignored).
inline std::optional<nlohmann::json> extract_json_object(const std::string& text) {
  for (std::size_t start = text.find('{'); start != std::string::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        try {
          return nlohmann::json::parse(text.substr(start, i - start + 1));
        } catch (const nlohmann::json::exception&) {
          break;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace alphamcts
