#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmuq/prompts.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

enum class DecodeMode { kDeterministic, kSampling };

inline const char* decode_mode_name(DecodeMode m) {
  return m == DecodeMode::kDeterministic ? "deterministic" : "sampling";
}

inline DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "deterministic") return DecodeMode::kDeterministic;
  if (name == "sampling") return DecodeMode::kSampling;
  throw ValidationError("unknown decode mode: " + name);
}

// Generation parameters. Deterministic mode pins temperature 0 and a single
// sample; sampling mode defaults to temperature 0.6, top-p 0.95, top-k 50.
struct DecodeParams {
  DecodeMode mode = DecodeMode::kDeterministic;
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int n_samples = 1;
  int max_tokens = 1024;

  static DecodeParams deterministic(int max_tokens = 1024) {
    DecodeParams d;
    d.max_tokens = max_tokens;
    return d;
  }

  static DecodeParams sampling(int n_samples = 20, int max_tokens = 1024) {
    DecodeParams d;
    d.mode = DecodeMode::kSampling;
    d.temperature = 0.6;
    d.top_p = 0.95;
    d.top_k = 50;
    d.n_samples = n_samples;
    d.max_tokens = max_tokens;
    return d;
  }

  void validate() const {
    if (mode == DecodeMode::kDeterministic && (temperature != 0.0 || n_samples != 1))
      throw ValidationError("deterministic decode requires temperature 0 and 1 sample");
    if (n_samples < 1) throw ValidationError("decode: n_samples must be >= 1");
    if (max_tokens < 1) throw ValidationError("decode: max_tokens must be >= 1");
    if (temperature < 0.0) throw ValidationError("decode: negative temperature");
    if (top_p <= 0.0 || top_p > 1.0) throw ValidationError("decode: top_p out of (0,1]");
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"mode", decode_mode_name(mode)},
                     {"temperature", temperature},
                     {"top_p", top_p},
                     {"n_samples", n_samples},
                     {"max_tokens", max_tokens}};
    j["top_k"] = top_k ? nlohmann::json(*top_k) : nlohmann::json(nullptr);
    return j;
  }

  static DecodeParams from_json(const nlohmann::json& j) {
    DecodeParams d;
    if (j.contains("mode")) d.mode = decode_mode_from_name(j["mode"].get<std::string>());
    if (d.mode == DecodeMode::kSampling) d = sampling();
    if (j.contains("temperature")) d.temperature = j["temperature"].get<double>();
    if (j.contains("top_p")) d.top_p = j["top_p"].get<double>();
    if (j.contains("top_k") && !j["top_k"].is_null()) d.top_k = j["top_k"].get<int>();
    if (j.contains("n_samples")) d.n_samples = j["n_samples"].get<int>();
    if (j.contains("max_tokens")) d.max_tokens = j["max_tokens"].get<int>();
    d.validate();
    return d;
  }

  // Canonical string for cache keys: any parameter change changes the key.
  std::string fingerprint() const { return to_json().dump(); }
};

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
  int64_t total_tokens = 0;
};

// One wire request always asks for a single completion; multi-sample runs
// issue one request per sample index so each lands in its own cache slot.
inline nlohmann::json build_chat_request(const std::string& model_id,
                                         const RenderedPrompt& prompt,
                                         const DecodeParams& decode,
                                         std::optional<uint64_t> seed,
                                         bool include_top_k) {
  decode.validate();
  nlohmann::json messages = nlohmann::json::array();
  size_t images = 0;
  for (const auto& msg : prompt.messages) {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", msg.text}});
    if (!msg.image_png.empty()) {
      ++images;
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:image/png;base64," + base64_encode(msg.image_png)}}}});
    }
    messages.push_back({{"role", msg.role}, {"content", content}});
  }
  if (images != 1)
    throw ValidationError("chat request must carry exactly one image attachment");
  nlohmann::json req{{"model", model_id},
                     {"messages", messages},
                     {"temperature", decode.temperature},
                     {"top_p", decode.top_p},
                     {"max_tokens", decode.max_tokens}};
  // top_k is an extension used by local inference servers, not baseline wire
  // schema; only emitted when the endpoint is flagged as supporting it.
  if (decode.top_k && include_top_k) req["top_k"] = *decode.top_k;
  if (seed) req["seed"] = *seed;
  return req;
}

// Assistant text from a chat-completions response; nullopt when the body does
// not carry one (surfaces as a malformed outcome downstream, not an error).
inline std::optional<std::string> parse_chat_response(const std::string& body,
                                                      TokenUsage* usage = nullptr) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  if (usage && j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    usage->prompt_tokens = u.value("prompt_tokens", int64_t{0});
    usage->completion_tokens = u.value("completion_tokens", int64_t{0});
    usage->total_tokens = u.value("total_tokens", int64_t{0});
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    return std::nullopt;
  const auto& msg = j["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content") ||
      !msg["message"]["content"].is_string())
    return std::nullopt;
  return msg["message"]["content"].get<std::string>();
}

inline nlohmann::json build_embeddings_request(const std::string& model_id,
                                               const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embeddings request needs at least one text");
  return nlohmann::json{{"model", model_id}, {"input", texts}};
}

// Vectors ordered by their response "index" field; nullopt on schema mismatch.
inline std::optional<std::vector<std::vector<double>>> parse_embeddings_response(
    const std::string& body, size_t expected_count) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.contains("data") || !j["data"].is_array()) return std::nullopt;
  const auto& data = j["data"];
  if (data.size() != expected_count) return std::nullopt;
  std::vector<std::vector<double>> out(expected_count);
  for (const auto& item : data) {
    if (!item.contains("index") || !item.contains("embedding")) return std::nullopt;
    size_t idx = item["index"].get<size_t>();
    if (idx >= expected_count || !item["embedding"].is_array()) return std::nullopt;
    out[idx] = item["embedding"].get<std::vector<double>>();
    if (out[idx].empty()) return std::nullopt;
  }
  for (const auto& v : out)
    if (v.empty()) return std::nullopt;
  return out;
}

}  // namespace vlmuq
