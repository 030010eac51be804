#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "vlmuq/corruptions.hpp"
#include "vlmuq/ecg_synth.hpp"
#include "vlmuq/runner.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

namespace detail {

// Paths inside a config file are resolved relative to the file's directory,
// so configs stay portable across checkouts.
inline std::filesystem::path resolve_path(const std::string& raw,
                                          const std::filesystem::path& base_dir) {
  std::filesystem::path p(raw);
  return p.is_absolute() ? p : base_dir / p;
}

template <typename T, size_t N>
void read_table(const nlohmann::json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N)
    throw ValidationError(std::string("config: '") + key + "' must be an array of " +
                          std::to_string(N) + " values (index 0 = identity)");
  for (size_t i = 0; i < N; ++i) out[i] = arr[i].get<T>();
}

}  // namespace detail

inline EndpointConfig endpoint_from_json(const nlohmann::json& j) {
  EndpointConfig e;
  e.base_url = j.value("base_url", std::string());
  e.api_key_env = j.value("api_key_env", std::string());
  e.is_mock = j.value("is_mock", false);
  e.supports_top_k = j.value("supports_top_k", false);
  e.supports_seed = j.value("supports_seed", true);
  e.tag_requests = j.value("tag_requests", false);
  e.concurrency = j.value("concurrency", 4);
  e.max_retries = j.value("max_retries", 4);
  e.retry_base_delay_ms = j.value("retry_base_delay_ms", 250.0);
  e.timeout_sec = j.value("timeout_sec", 60);
  return e;
}

inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir) {
  RunConfig cfg;
  if (!j.contains("manifest"))
    throw ValidationError("run config: 'manifest' path is required");
  cfg.manifest_path = detail::resolve_path(j.at("manifest").get<std::string>(), base_dir);
  if (!j.contains("out_dir"))
    throw ValidationError("run config: 'out_dir' is required");
  cfg.out_dir = detail::resolve_path(j.at("out_dir").get<std::string>(), base_dir);
  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
    throw ValidationError("run config: 'models' must be a non-empty array");
  cfg.models = j.at("models").get<std::vector<std::string>>();

  if (j.contains("variants"))
    for (const auto& v : j.at("variants")) cfg.variants.push_back(RunVariant::from_json(v));
  if (j.contains("decode")) cfg.decode = DecodeParams::from_json(j.at("decode"));

  if (j.contains("caption")) {
    const auto& c = j.at("caption");
    if (c.contains("catalog"))
      cfg.caption_catalog = catalog_id_from_name(c.at("catalog").get<std::string>());
    cfg.caption_k = c.value("k", cfg.caption_k);
    cfg.embedding_model = c.value("embedding_model", cfg.embedding_model);
  }

  if (j.contains("prompt_overrides"))
    cfg.prompt_overrides =
        detail::resolve_path(j.at("prompt_overrides").get<std::string>(), base_dir);
  if (j.contains("classification_log"))
    cfg.classification_log =
        detail::resolve_path(j.at("classification_log").get<std::string>(), base_dir);

  if (j.contains("endpoint")) cfg.endpoint = endpoint_from_json(j.at("endpoint"));
  if (j.contains("budget")) cfg.budget.max_calls = j.at("budget").value("max_calls", int64_t(0));
  cfg.abort_failure_ratio = j.value("abort_failure_ratio", cfg.abort_failure_ratio);
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ValidationError("run config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("run config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

// Knobs for corpus construction: the severity tables and the synthetic-trace
// geometry. Every field has the stock default; a params file overrides only
// what it names.
struct CorpusParams {
  CorruptionTables tables;
  EcgAnomalySpec ecg;  // seed is overridden per generated sample
};

inline CorpusParams corpus_params_from_json(const nlohmann::json& j) {
  CorpusParams p;
  detail::read_table(j, "gaussian_sigma", p.tables.gaussian_sigma);
  detail::read_table(j, "defocus_radius", p.tables.defocus_radius);
  detail::read_table(j, "pixelate_fraction", p.tables.pixelate_fraction);
  if (p.tables.gaussian_sigma[0] != 0.0 || p.tables.defocus_radius[0] != 0 ||
      p.tables.pixelate_fraction[0] != 1.0)
    throw ValidationError("config: severity index 0 must stay the identity");
  if (j.contains("ecg")) {
    const auto& e = j.at("ecg");
    p.ecg.n_points = e.value("n_points", p.ecg.n_points);
    p.ecg.param = e.value("param", p.ecg.param);
    p.ecg.line_width_px = e.value("line_width", p.ecg.line_width_px);
    p.ecg.canvas_width = e.value("width", p.ecg.canvas_width);
    p.ecg.canvas_height = e.value("height", p.ecg.canvas_height);
    p.ecg.validate();
  }
  return p;
}

inline CorpusParams load_corpus_params(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ValidationError("corpus params not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("corpus params " + path.string() + ": " + e.what());
  }
  return corpus_params_from_json(j);
}

}  // namespace vlmuq
