#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmuq/parser.hpp"
#include "vlmuq/prompts.hpp"
#include "vlmuq/util.hpp"
#include "vlmuq/wire.hpp"

namespace vlmuq {

// The unit of cache identity: two requests share a slot only if they agree on
// the sample, the exact prompt variant, the model, every decode parameter,
// and the sample index.
inline std::string make_cache_key(const std::string& sample_id,
                                  const std::string& variant_fingerprint,
                                  const std::string& model_id,
                                  const DecodeParams& decode, int sample_index) {
  return sha256_hex(sample_id + '\x1f' + variant_fingerprint + '\x1f' + model_id +
                    '\x1f' + decode.fingerprint() + '\x1f' + std::to_string(sample_index));
}

// Everything observed for one model query. For caption runs the parsed
// outcome means "usable caption" (kLabel with empty class) vs kMalformed.
struct QueryRecord {
  std::string sample_id;
  std::string catalog_id;
  std::string strategy;
  bool rejection_enabled = false;
  std::string model_id;
  DecodeParams decode;
  int sample_index = 0;
  std::string raw_text;
  ParsedAnswer parsed;
  double latency_ms = 0.0;
  TokenUsage usage;
  bool cache_hit = false;
  std::string timestamp;
  std::string cache_key;
  std::string catalog_fingerprint;  // whole-catalog digest, for provenance

  nlohmann::json to_json() const {
    nlohmann::json j{{"sample_id", sample_id},
                     {"catalog_id", catalog_id},
                     {"strategy", strategy},
                     {"rejection_enabled", rejection_enabled},
                     {"model_id", model_id},
                     {"decode", decode.to_json()},
                     {"sample_index", sample_index},
                     {"raw_text", raw_text},
                     {"outcome", outcome_name(parsed.outcome)},
                     {"latency_ms", latency_ms},
                     {"cache_hit", cache_hit},
                     {"timestamp", timestamp},
                     {"cache_key", cache_key},
                     {"catalog_fingerprint", catalog_fingerprint}};
    j["pred_class"] = parsed.outcome == Outcome::kLabel ? nlohmann::json(parsed.class_name)
                                                        : nlohmann::json(nullptr);
    j["usage"] = {{"prompt_tokens", usage.prompt_tokens},
                  {"completion_tokens", usage.completion_tokens},
                  {"total_tokens", usage.total_tokens}};
    return j;
  }

  static QueryRecord from_json(const nlohmann::json& j) {
    QueryRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.catalog_id = j.at("catalog_id").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.rejection_enabled = j.at("rejection_enabled").get<bool>();
    r.model_id = j.at("model_id").get<std::string>();
    r.decode = DecodeParams::from_json(j.at("decode"));
    r.sample_index = j.at("sample_index").get<int>();
    r.raw_text = j.at("raw_text").get<std::string>();
    r.parsed.outcome = outcome_from_name(j.at("outcome").get<std::string>());
    if (j.contains("pred_class") && !j["pred_class"].is_null())
      r.parsed.class_name = j["pred_class"].get<std::string>();
    r.latency_ms = j.value("latency_ms", 0.0);
    r.cache_hit = j.value("cache_hit", false);
    r.timestamp = j.value("timestamp", "");
    r.cache_key = j.value("cache_key", "");
    r.catalog_fingerprint = j.value("catalog_fingerprint", "");
    if (j.contains("usage")) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", int64_t{0});
      r.usage.completion_tokens = j["usage"].value("completion_tokens", int64_t{0});
      r.usage.total_tokens = j["usage"].value("total_tokens", int64_t{0});
    }
    return r;
  }
};

// Append-only JSON-lines log with a single serialized writer. Each append is
// flushed whole, so a killed run leaves at most one truncated trailing line,
// which the loader skips.
class RecordLog {
 public:
  explicit RecordLog(std::filesystem::path path) : path_(std::move(path)) {
    std::filesystem::create_directories(path_.parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open record log: " + path_.string());
  }

  void append(const QueryRecord& r) {
    std::lock_guard<std::mutex> lock(mu_);
    out_ << r.to_json().dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("record log write failed: " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

  static std::vector<QueryRecord> load(const std::filesystem::path& path) {
    std::vector<QueryRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open record log: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded()) continue;  // torn tail from a killed run
      records.push_back(QueryRecord::from_json(j));
    }
    return records;
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace vlmuq
