#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vlmuq/cache.hpp"
#include "vlmuq/prompts.hpp"
#include "vlmuq/util.hpp"
#include "vlmuq/wire.hpp"

namespace vlmuq {

struct EndpointConfig {
  std::string base_url;     // e.g. "http://127.0.0.1:8080" or a hosted https URL
  std::string api_key_env;  // name of the env var holding the key; empty = no auth
  bool is_mock = false;     // mock endpoints are exempt from the budget guard
  bool supports_top_k = false;
  bool supports_seed = true;
  bool tag_requests = false;  // test-only: runner appends an id tag line
  int concurrency = 4;
  int max_retries = 4;
  double retry_base_delay_ms = 250.0;
  int timeout_sec = 60;

  void validate() const {
    if (base_url.empty()) throw ValidationError("endpoint base_url is empty");
    if (concurrency < 1) throw ValidationError("endpoint concurrency must be >= 1");
    if (max_retries < 0) throw ValidationError("endpoint max_retries must be >= 0");
    if (timeout_sec < 1) throw ValidationError("endpoint timeout must be >= 1s");
  }

  std::optional<std::string> api_key() const {
    if (api_key_env.empty()) return std::nullopt;
    return env_var(api_key_env);
  }
};

struct BudgetConfig {
  int64_t max_calls = 0;  // live runs must budget explicitly; 0 refuses any call
};

// Pre-flight gate: refuses before any network traffic when the projected call
// count exceeds the budget. Mock endpoints are exempt.
inline void run_budget_guard(int64_t projected_calls, const EndpointConfig& endpoint,
                             const BudgetConfig& budget) {
  if (endpoint.is_mock) return;
  if (projected_calls > budget.max_calls)
    throw BudgetRefusal("projected " + std::to_string(projected_calls) +
                        " live calls exceed budget of " +
                        std::to_string(budget.max_calls));
}

namespace detail {

// Counting gate bounding in-flight requests; RAII token releases on scope exit.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : limit_(limit) {}

  class Token {
   public:
    explicit Token(ConcurrencyGate& gate) : gate_(gate) {
      std::unique_lock<std::mutex> lock(gate_.mu_);
      gate_.cv_.wait(lock, [&] { return gate_.active_ < gate_.limit_; });
      ++gate_.active_;
    }
    ~Token() {
      {
        std::lock_guard<std::mutex> lock(gate_.mu_);
        --gate_.active_;
      }
      gate_.cv_.notify_one();
    }
    Token(const Token&) = delete;
    Token& operator=(const Token&) = delete;

   private:
    ConcurrencyGate& gate_;
  };

 private:
  friend class Token;
  int limit_;
  int active_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace detail

// Thread-safe client for OpenAI-compatible chat and embeddings endpoints:
// bounded concurrency, exponential-backoff retries, and a transparent disk
// cache keyed by the caller.
class ChatClient {
 public:
  ChatClient(EndpointConfig endpoint, DiskCache* cache)
      : endpoint_(std::move(endpoint)), cache_(cache), gate_(endpoint_.concurrency) {
    endpoint_.validate();
  }

  struct ChatResult {
    std::string raw_text;  // empty when the response body was malformed
    double latency_ms = 0.0;
    TokenUsage usage;
    bool cache_hit = false;
  };

  // One completion per call; sampling runs call once per sample index. The
  // cache is consulted before any network traffic.
  ChatResult chat(const std::string& model_id, const RenderedPrompt& prompt,
                  const DecodeParams& decode, std::optional<uint64_t> seed,
                  const std::string& cache_key) {
    if (cache_) {
      if (auto hit = cache_->get(cache_key))
        return ChatResult{*hit, 0.0, {}, true};
    }
    nlohmann::json req = build_chat_request(
        model_id, prompt, decode, endpoint_.supports_seed ? seed : std::nullopt,
        endpoint_.supports_top_k);

    ChatResult result;
    auto started = std::chrono::steady_clock::now();
    std::string body = post_with_retries("/v1/chat/completions", req.dump());
    result.latency_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    // A 200 with an undecodable body is recorded as empty text and surfaces
    // as a malformed outcome downstream rather than an error here.
    result.raw_text = parse_chat_response(body, &result.usage).value_or("");
    if (cache_) cache_->put(cache_key, result.raw_text);
    return result;
  }

  // Order-preserving embeddings with a per-text cache. Only cache misses are
  // sent over the wire, in a single batch.
  std::vector<std::vector<double>> embed(const std::string& model_id,
                                         const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("embed: empty text list");
    std::vector<std::vector<double>> out(texts.size());
    std::vector<size_t> missing;
    for (size_t i = 0; i < texts.size(); ++i) {
      std::string key = embed_cache_key(model_id, texts[i]);
      if (cache_) {
        if (auto hit = cache_->get(key)) {
          out[i] = nlohmann::json::parse(*hit).get<std::vector<double>>();
          continue;
        }
      }
      missing.push_back(i);
    }
    if (missing.empty()) return out;

    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (size_t i : missing) batch.push_back(texts[i]);
    nlohmann::json req = build_embeddings_request(model_id, batch);
    std::string body = post_with_retries("/v1/embeddings", req.dump());
    auto vectors = parse_embeddings_response(body, batch.size());
    if (!vectors)
      throw std::runtime_error("embeddings endpoint returned an undecodable body");
    for (size_t k = 0; k < missing.size(); ++k) {
      out[missing[k]] = (*vectors)[k];
      if (cache_)
        cache_->put(embed_cache_key(model_id, texts[missing[k]]),
                    nlohmann::json((*vectors)[k]).dump());
    }
    return out;
  }

  int64_t network_calls() const { return network_calls_.load(); }

  const EndpointConfig& endpoint() const { return endpoint_; }

 private:
  static std::string embed_cache_key(const std::string& model_id,
                                     const std::string& text) {
    return sha256_hex("embed\x1f" + model_id + '\x1f' + text);
  }

  httplib::Client make_http_client() const {
    httplib::Client cli(endpoint_.base_url);
    cli.set_connection_timeout(endpoint_.timeout_sec, 0);
    cli.set_read_timeout(endpoint_.timeout_sec, 0);
    cli.set_write_timeout(endpoint_.timeout_sec, 0);
    return cli;
  }

  // POST under the concurrency gate with retries: 429/5xx/transport errors
  // back off exponentially; auth failures and exhaustion are fatal.
  std::string post_with_retries(const std::string& path, const std::string& body) {
    detail::ConcurrencyGate::Token token(gate_);
    httplib::Headers headers;
    if (auto key = endpoint_.api_key()) headers.emplace("Authorization", "Bearer " + *key);

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
      if (attempt > 0) {
        double delay = endpoint_.retry_base_delay_ms * double(1 << (attempt - 1));
        std::this_thread::sleep_for(
            std::chrono::milliseconds(static_cast<int64_t>(delay)));
      }
      httplib::Client cli = make_http_client();
      ++network_calls_;
      httplib::Result res = cli.Post(path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;  // timeouts / refused connections are retryable
      }
      if (res->status == 200) return res->body;
      if (res->status == 401 || res->status == 403)
        throw std::runtime_error("endpoint rejected credentials (HTTP " +
                                 std::to_string(res->status) + ")");
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      throw std::runtime_error("endpoint returned HTTP " + std::to_string(res->status) +
                               " for " + path);
    }
    throw std::runtime_error("retries exhausted for " + path + " (" + last_error + ")");
  }

  EndpointConfig endpoint_;
  DiskCache* cache_;
  detail::ConcurrencyGate gate_;
  std::atomic<int64_t> network_calls_{0};
};

}  // namespace vlmuq
