#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vlmuq/cache.hpp"
#include "vlmuq/client.hpp"
#include "vlmuq/manifest.hpp"
#include "vlmuq/metrics.hpp"
#include "vlmuq/parser.hpp"
#include "vlmuq/prompts.hpp"
#include "vlmuq/records.hpp"
#include "vlmuq/report.hpp"
#include "vlmuq/tagline.hpp"
#include "vlmuq/util.hpp"
#include "vlmuq/wire.hpp"

namespace vlmuq {

enum class RunKind { kAnomaly, kClassification, kCaptionDiversity };

inline const char* run_kind_name(RunKind k) {
  switch (k) {
    case RunKind::kAnomaly: return "anomaly";
    case RunKind::kClassification: return "classification";
    case RunKind::kCaptionDiversity: return "caption_diversity";
  }
  throw ValidationError("unknown run kind");
}

// One prompt variant to evaluate: which catalog entry, phrased how, and with
// or without the rejection clause.
struct RunVariant {
  CatalogId catalog = CatalogId::kCifarAnomaly;
  Strategy strategy = Strategy::kSimple;
  bool rejection_enabled = true;

  nlohmann::json to_json() const {
    return {{"catalog", catalog_id_name(catalog)},
            {"strategy", strategy_name(strategy)},
            {"rejection", rejection_enabled}};
  }
  static RunVariant from_json(const nlohmann::json& j) {
    RunVariant v;
    v.catalog = catalog_id_from_name(j.at("catalog").get<std::string>());
    v.strategy = strategy_from_name(j.value("strategy", "simple"));
    v.rejection_enabled = j.value("rejection", true);
    return v;
  }
};

// Full description of an evaluation run. The same struct drives all three run
// kinds; caption runs ignore `variants` and classification runs ignore the
// caption fields.
struct RunConfig {
  std::filesystem::path manifest_path;
  std::vector<std::string> models;
  std::vector<RunVariant> variants;
  DecodeParams decode = DecodeParams::deterministic();

  CatalogId caption_catalog = CatalogId::kCaptionImagenet;
  int caption_k = 20;
  std::string embedding_model = "all-mpnet-base-v2";

  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> prompt_overrides;
  // Optional record log from a classification run over the same manifest;
  // enables the rejected-vs-classified diversity split.
  std::optional<std::filesystem::path> classification_log;

  EndpointConfig endpoint;
  BudgetConfig budget;
  double abort_failure_ratio = 0.05;
  bool resume = false;

  void validate() const {
    if (manifest_path.empty()) throw ValidationError("run config: manifest path required");
    if (out_dir.empty()) throw ValidationError("run config: output directory required");
    if (models.empty()) throw ValidationError("run config: at least one model required");
    if (caption_k < 2) throw ValidationError("run config: caption_k must be at least 2");
    if (abort_failure_ratio < 0.0 || abort_failure_ratio > 1.0)
      throw ValidationError("run config: abort_failure_ratio must lie in [0, 1]");
    if (!is_caption_catalog(caption_catalog))
      throw ValidationError("run config: caption_catalog must name a caption catalog");
    decode.validate();
    endpoint.validate();
  }
};

// Digest of everything that determines the *content* of a run. Endpoint and
// output paths are deliberately excluded so an interrupted run can resume
// against a restarted server (mock ports change) or a relocated directory.
inline std::string run_config_digest(const RunConfig& cfg, RunKind kind) {
  nlohmann::json j;
  j["kind"] = run_kind_name(kind);
  j["manifest_sha256"] = sha256_file(cfg.manifest_path);
  j["models"] = cfg.models;
  j["decode"] = cfg.decode.to_json();
  if (kind == RunKind::kCaptionDiversity) {
    j["caption_catalog"] = catalog_id_name(cfg.caption_catalog);
    j["caption_k"] = cfg.caption_k;
    j["embedding_model"] = cfg.embedding_model;
  } else {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : cfg.variants) vars.push_back(v.to_json());
    j["variants"] = std::move(vars);
  }
  return sha256_hex(j.dump());
}

// A single planned model query, pointing into the manifest it came from.
struct ChatTask {
  const ImageSample* sample = nullptr;
  std::string model;
  CatalogId catalog = CatalogId::kCifarAnomaly;
  Strategy strategy = Strategy::kSimple;
  bool rejection_enabled = false;
  DecodeParams decode;
  int sample_index = 0;
  bool caption = false;  // parse as free caption instead of a labeled answer
  std::string cache_key;
};

inline std::vector<ChatTask> plan_variant_tasks(const RunConfig& cfg,
                                                const Manifest& manifest,
                                                const PromptCatalog& catalog) {
  if (cfg.variants.empty())
    throw ValidationError("run config: at least one prompt variant required");
  std::vector<ChatTask> tasks;
  tasks.reserve(cfg.models.size() * cfg.variants.size() * manifest.entries.size());
  for (const auto& model : cfg.models) {
    for (const auto& v : cfg.variants) {
      if (is_caption_catalog(v.catalog))
        throw ValidationError("caption catalogs cannot run as classification variants");
      std::string vfp =
          catalog.variant_fingerprint(v.catalog, v.strategy, v.rejection_enabled);
      for (const auto& sample : manifest.entries) {
        ChatTask t;
        t.sample = &sample;
        t.model = model;
        t.catalog = v.catalog;
        t.strategy = v.strategy;
        t.rejection_enabled = v.rejection_enabled;
        t.decode = cfg.decode;
        t.sample_index = 0;
        t.cache_key = make_cache_key(sample.id, vfp, model, cfg.decode, 0);
        tasks.push_back(std::move(t));
      }
    }
  }
  return tasks;
}

inline std::vector<ChatTask> plan_caption_tasks(const RunConfig& cfg,
                                                const Manifest& manifest,
                                                const PromptCatalog& catalog) {
  std::vector<ChatTask> tasks;
  tasks.reserve(cfg.models.size() * manifest.entries.size() * size_t(cfg.caption_k));
  for (const auto& model : cfg.models) {
    std::string vfp =
        catalog.variant_fingerprint(cfg.caption_catalog, Strategy::kSimple, false);
    for (const auto& sample : manifest.entries) {
      for (int i = 0; i < cfg.caption_k; ++i) {
        ChatTask t;
        t.sample = &sample;
        t.model = model;
        t.catalog = cfg.caption_catalog;
        t.strategy = Strategy::kSimple;
        t.rejection_enabled = false;
        t.decode = cfg.decode;
        t.sample_index = i;
        t.caption = true;
        t.cache_key = make_cache_key(sample.id, vfp, model, cfg.decode, i);
        tasks.push_back(std::move(t));
      }
    }
  }
  return tasks;
}

struct RunOutcome {
  std::vector<QueryRecord> records;  // previously logged + newly produced
  std::filesystem::path records_path;
  int64_t new_records = 0;
  int64_t skipped_existing = 0;  // tasks already present in the record log
  int64_t network_calls = 0;
  int64_t failures = 0;  // hard failures below the abort threshold
};

// Executes planned queries with exactly-once semantics per cache key: tasks
// already in the record log are skipped, responses are disk-cached, and every
// completed query is appended to records.jsonl before it counts as done. An
// interrupted run leaves a valid partial log; rerunning with resume picks up
// where it stopped.
inline RunOutcome execute_chat_tasks(const RunConfig& cfg, RunKind kind,
                                     const PromptCatalog& catalog,
                                     const std::vector<ChatTask>& tasks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const fs::path records_path = cfg.out_dir / "records.jsonl";
  const fs::path state_path = cfg.out_dir / "run_state.json";
  const std::string digest = run_config_digest(cfg, kind);
  const std::string catalog_fp = catalog.fingerprint();

  const bool have_state = fs::exists(state_path);
  const bool have_records = fs::exists(records_path);
  if (have_state) {
    nlohmann::json st = nlohmann::json::parse(read_file(state_path));
    if (st.value("config_digest", "") != digest ||
        st.value("catalog_fingerprint", "") != catalog_fp)
      throw ValidationError("output directory '" + cfg.out_dir.string() +
                            "' holds a run with a different configuration; refusing to "
                            "mix results (choose a fresh directory)");
  }
  if (have_records && !cfg.resume)
    throw ValidationError("output directory '" + cfg.out_dir.string() +
                          "' already contains records.jsonl; pass --resume to continue "
                          "the interrupted run or choose a fresh directory");
  if (cfg.resume && !have_state)
    throw ValidationError("cannot resume: run_state.json missing from '" +
                          cfg.out_dir.string() + "'");
  if (!have_state) {
    nlohmann::json st{{"config_digest", digest},
                      {"catalog_fingerprint", catalog_fp},
                      {"kind", run_kind_name(kind)},
                      {"created_at", utc_timestamp()}};
    atomic_write_file(state_path, st.dump(2) + "\n");
  }

  RunOutcome out;
  out.records_path = records_path;
  std::unordered_set<std::string> done;
  if (have_records) {
    out.records = RecordLog::load(records_path);
    done.reserve(out.records.size());
    for (const auto& r : out.records) done.insert(r.cache_key);
  }

  std::vector<const ChatTask*> pending;
  pending.reserve(tasks.size());
  for (const auto& t : tasks)
    if (!done.count(t.cache_key)) pending.push_back(&t);
  out.skipped_existing = int64_t(tasks.size() - pending.size());

  DiskCache cache(cfg.out_dir / "cache");
  int64_t projected = 0;
  for (const ChatTask* t : pending)
    if (!cache.contains(t->cache_key)) ++projected;
  run_budget_guard(projected, cfg.endpoint, cfg.budget);
  if (pending.empty()) return out;

  ChatClient client(cfg.endpoint, &cache);
  RecordLog log(records_path);
  const fs::path base_dir = cfg.manifest_path.parent_path();

  std::atomic<size_t> next{0};
  std::atomic<int64_t> failures{0};
  std::atomic<bool> abort{false};
  const auto failure_limit =
      int64_t(cfg.abort_failure_ratio * double(pending.size()));
  std::mutex mu;  // guards out.records / out.new_records / last_error
  std::string last_error;

  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= pending.size() || abort.load()) return;
      const ChatTask& t = *pending[i];
      try {
        std::string png = read_file(base_dir / t.sample->file);
        RenderedPrompt prompt =
            catalog.render(t.catalog, t.strategy, t.rejection_enabled, png);
        if (cfg.endpoint.tag_requests && !prompt.messages.empty())
          prompt.messages.front().text +=
              "\n\n" + format_tag_line(t.sample->id, task_kind_name(t.sample->task),
                                       t.sample->anomaly, t.sample->class_name,
                                       t.sample->severity, t.sample->ambiguity_bin,
                                       t.sample_index);
        uint64_t seed = derive_seed(t.sample->id, t.sample_index);
        ChatClient::ChatResult res =
            client.chat(t.model, prompt, t.decode, seed, t.cache_key);

        QueryRecord rec;
        rec.sample_id = t.sample->id;
        rec.catalog_id = catalog_id_name(t.catalog);
        rec.strategy = strategy_name(t.strategy);
        rec.rejection_enabled = t.rejection_enabled;
        rec.model_id = t.model;
        rec.decode = t.decode;
        rec.sample_index = t.sample_index;
        rec.raw_text = res.raw_text;
        if (t.caption) {
          auto cap = parse_caption(res.raw_text);
          rec.parsed.outcome = cap ? Outcome::kLabel : Outcome::kMalformed;
          if (!cap) rec.parsed.raw_text = res.raw_text;
        } else {
          rec.parsed = parse_answer(res.raw_text, prompt.answer_key,
                                    prompt.label_space, prompt.rejection_tokens);
        }
        rec.latency_ms = res.latency_ms;
        rec.usage = res.usage;
        rec.cache_hit = res.cache_hit;
        rec.timestamp = utc_timestamp();
        rec.cache_key = t.cache_key;
        rec.catalog_fingerprint = catalog_fp;
        log.append(rec);

        std::lock_guard<std::mutex> lk(mu);
        out.records.push_back(std::move(rec));
        ++out.new_records;
      } catch (const std::exception& e) {
        int64_t f = failures.fetch_add(1) + 1;
        {
          std::lock_guard<std::mutex> lk(mu);
          last_error = e.what();
        }
        if (f > failure_limit) abort.store(true);
      }
    }
  };

  size_t n_threads = std::min(size_t(std::max(1, cfg.endpoint.concurrency)),
                              pending.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  out.failures = failures.load();
  out.network_calls = client.network_calls();
  if (abort.load())
    throw std::runtime_error(
        "run aborted: " + std::to_string(out.failures) + " of " +
        std::to_string(pending.size()) + " queries hard-failed (abort limit " +
        std::to_string(failure_limit) + "); last error: " + last_error +
        "; completed records kept at " + records_path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Run entry points: plan, execute, score, write reports.
// ---------------------------------------------------------------------------

struct EvalRun {
  RunOutcome outcome;
  nlohmann::json report;
  std::filesystem::path report_dir;
};

namespace detail {

inline PromptCatalog load_catalog(const RunConfig& cfg) {
  PromptCatalog catalog;
  if (cfg.prompt_overrides) catalog.load_overrides(*cfg.prompt_overrides);
  return catalog;
}

inline Provenance make_provenance(const RunConfig& cfg, RunKind kind,
                                  const PromptCatalog& catalog) {
  Provenance p;
  p.config_digest = run_config_digest(cfg, kind);
  p.catalog_fingerprint = catalog.fingerprint();
  p.manifest_digest = sha256_file(cfg.manifest_path);
  p.generated_at = utc_timestamp();
  return p;
}

inline GroupKey infer_group_key(const Manifest& manifest) {
  bool galaxy = !manifest.entries.empty() &&
                manifest.entries.front().task == TaskKind::kGalaxyReject;
  return galaxy ? GroupKey::kAmbiguityBin : GroupKey::kSeverity;
}

}  // namespace detail

inline EvalRun run_anomaly(const RunConfig& cfg) {
  cfg.validate();
  Manifest manifest = Manifest::load(cfg.manifest_path);
  PromptCatalog catalog = detail::load_catalog(cfg);
  auto tasks = plan_variant_tasks(cfg, manifest, catalog);

  EvalRun run;
  run.outcome = execute_chat_tasks(cfg, RunKind::kAnomaly, catalog, tasks);
  auto grouped = join_records(run.outcome.records, manifest);
  Provenance prov = detail::make_provenance(cfg, RunKind::kAnomaly, catalog);
  run.report = anomaly_report_json(grouped, manifest, prov);
  run.report_dir = cfg.out_dir / "reports";
  std::filesystem::create_directories(run.report_dir);
  atomic_write_file(run.report_dir / "anomaly_report.json", run.report.dump(2) + "\n");
  write_anomaly_csv(run.report_dir / "anomaly_report.csv", grouped);
  return run;
}

inline EvalRun run_classification(const RunConfig& cfg) {
  cfg.validate();
  Manifest manifest = Manifest::load(cfg.manifest_path);
  PromptCatalog catalog = detail::load_catalog(cfg);
  auto tasks = plan_variant_tasks(cfg, manifest, catalog);

  EvalRun run;
  run.outcome = execute_chat_tasks(cfg, RunKind::kClassification, catalog, tasks);
  auto grouped = join_records(run.outcome.records, manifest);
  GroupKey key = detail::infer_group_key(manifest);
  Provenance prov = detail::make_provenance(cfg, RunKind::kClassification, catalog);
  run.report = selective_report_json(grouped, key, prov);
  run.report_dir = cfg.out_dir / "reports";
  std::filesystem::create_directories(run.report_dir);
  atomic_write_file(run.report_dir / "selective_report.json", run.report.dump(2) + "\n");
  write_selective_csv(run.report_dir / "selective_report.csv", grouped, key);
  write_selective_svg(run.report_dir / "selective_report.svg", grouped, key,
                      "Selective classification");
  return run;
}

// Caption-diversity run: k captions per image, embeddings, mean pairwise
// dissimilarity per image, grouped means, and (when a classification log is
// supplied) the rejected-vs-classified split.
inline EvalRun run_caption_diversity(const RunConfig& cfg) {
  cfg.validate();
  Manifest manifest = Manifest::load(cfg.manifest_path);
  PromptCatalog catalog = detail::load_catalog(cfg);
  auto tasks = plan_caption_tasks(cfg, manifest, catalog);

  EvalRun run;
  run.outcome = execute_chat_tasks(cfg, RunKind::kCaptionDiversity, catalog, tasks);

  // Usable captions per (model, sample), in sample-index order.
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, std::string>>>
      captions;
  for (const auto& rec : run.outcome.records) {
    if (rec.parsed.outcome != Outcome::kLabel) continue;
    if (auto cap = parse_caption(rec.raw_text))
      captions[{rec.model_id, rec.sample_id}].emplace_back(rec.sample_index, *cap);
  }

  DiskCache cache(cfg.out_dir / "cache");
  ChatClient client(cfg.endpoint, &cache);
  std::vector<DiversityScore> scores;
  int64_t skipped_samples = 0;
  for (auto& [key, caps] : captions) {
    if (caps.size() < 2) {
      ++skipped_samples;
      continue;
    }
    std::sort(caps.begin(), caps.end());
    std::vector<std::string> texts;
    texts.reserve(caps.size());
    for (auto& [idx, text] : caps) texts.push_back(text);
    auto vectors = client.embed(cfg.embedding_model, texts);
    DiversityScore s;
    s.sample_id = key.second;
    s.k = int(texts.size());
    s.score = caption_diversity(vectors);
    s.embedding_model_id = cfg.embedding_model;
    scores.push_back(std::move(s));
  }
  run.outcome.network_calls += client.network_calls();
  write_diversity_scores(cfg.out_dir / "diversity_scores.jsonl", scores);

  std::vector<QueryRecord> cls_records;
  if (cfg.classification_log) {
    if (!std::filesystem::exists(*cfg.classification_log))
      throw ValidationError("classification log not found: " +
                            cfg.classification_log->string());
    cls_records = RecordLog::load(*cfg.classification_log);
  }
  GroupKey key = detail::infer_group_key(manifest);
  Provenance prov = detail::make_provenance(cfg, RunKind::kCaptionDiversity, catalog);
  run.report = diversity_report_json(scores, manifest, cls_records, key, prov);
  run.report["n_samples_skipped"] = skipped_samples;
  run.report_dir = cfg.out_dir / "reports";
  std::filesystem::create_directories(run.report_dir);
  atomic_write_file(run.report_dir / "diversity_report.json", run.report.dump(2) + "\n");
  write_diversity_csv(run.report_dir / "diversity_report.csv", run.report);
  write_diversity_svg(run.report_dir / "diversity_report.svg", run.report,
                      "Caption diversity");
  return run;
}

}  // namespace vlmuq
