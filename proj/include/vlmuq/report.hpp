#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include "vlmuq/manifest.hpp"
#include "vlmuq/metrics.hpp"
#include "vlmuq/records.hpp"
#include "vlmuq/svg_chart.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

// Everything a downstream reader needs to trace a report back to the exact
// inputs that produced it.
struct Provenance {
  std::string config_digest;
  std::string catalog_fingerprint;
  std::string manifest_digest;
  std::string generated_at;

  nlohmann::json to_json() const {
    return {{"config_digest", config_digest},
            {"catalog_fingerprint", catalog_fingerprint},
            {"manifest_digest", manifest_digest},
            {"generated_at", generated_at}};
  }
};

// One (model, prompt variant) cell of a report table.
struct VariantKey {
  std::string model;
  std::string catalog;
  std::string strategy;
  bool rejection_enabled = false;

  std::string label() const {
    return model + "|" + catalog + "|" + strategy + "|" +
           (rejection_enabled ? "reject" : "standard");
  }
  bool operator<(const VariantKey& o) const {
    return std::tie(model, catalog, strategy, rejection_enabled) <
           std::tie(o.model, o.catalog, o.strategy, o.rejection_enabled);
  }
};

namespace detail {

inline std::unordered_map<std::string, const ImageSample*> index_manifest(
    const Manifest& manifest) {
  std::unordered_map<std::string, const ImageSample*> idx;
  idx.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) idx.emplace(e.id, &e);
  return idx;
}

inline ScoredRecord score_record(const QueryRecord& rec, const ImageSample& sample) {
  ScoredRecord s;
  s.sample_id = rec.sample_id;
  s.outcome = rec.parsed.outcome;
  s.pred_class = rec.parsed.class_name;
  s.truth_anomaly = sample.anomaly;
  s.truth_class = sample.class_name;
  s.severity = sample.severity;
  s.ambiguity_bin = sample.ambiguity_bin;
  return s;
}

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace detail

// Joins a query log against the manifest it was produced from, grouped by
// (model, variant). A record whose sample id is missing from the manifest
// indicates mixed-up inputs and is rejected outright.
inline std::map<VariantKey, std::vector<ScoredRecord>> join_records(
    const std::vector<QueryRecord>& records, const Manifest& manifest) {
  auto idx = detail::index_manifest(manifest);
  std::map<VariantKey, std::vector<ScoredRecord>> grouped;
  for (const auto& rec : records) {
    auto it = idx.find(rec.sample_id);
    if (it == idx.end())
      throw ValidationError("record references sample '" + rec.sample_id +
                            "' absent from the manifest");
    VariantKey key{rec.model_id, rec.catalog_id, rec.strategy, rec.rejection_enabled};
    grouped[key].push_back(detail::score_record(rec, *it->second));
  }
  return grouped;
}

// ---------------------------------------------------------------------------
// Anomaly rejection report (precision / recall / F1 per variant + the
// prevalence baseline a blind coin-flip rejector would score).
// ---------------------------------------------------------------------------

inline nlohmann::json anomaly_report_json(
    const std::map<VariantKey, std::vector<ScoredRecord>>& grouped,
    const Manifest& manifest, const Provenance& prov) {
  int n_anom = 0, n_in = 0;
  for (const auto& e : manifest.entries) (e.anomaly ? n_anom : n_in)++;

  nlohmann::json out;
  out["kind"] = "anomaly_rejection";
  out["provenance"] = prov.to_json();
  out["n_anomaly"] = n_anom;
  out["n_in_space"] = n_in;
  if (n_anom > 0 && n_in > 0) {
    auto [coin_p, coin_r] = random_baseline(n_anom, n_in, 0.5);
    out["coin_baseline"] = {{"reject_prob", 0.5},
                            {"precision", coin_p},
                            {"recall", coin_r}};
  }
  out["variants"] = nlohmann::json::array();
  for (const auto& [key, recs] : grouped) {
    AnomalyReport r = anomaly_prf(recs);
    nlohmann::json v;
    v["model"] = key.model;
    v["catalog"] = key.catalog;
    v["strategy"] = key.strategy;
    v["rejection_enabled"] = key.rejection_enabled;
    v["tp"] = r.tp;
    v["fp"] = r.fp;
    v["fn"] = r.fn;
    v["tn"] = r.tn;
    v["malformed"] = r.malformed;
    auto put = [&v](const char* name, const std::optional<double>& x) {
      if (x) v[name] = *x; else v[name] = nullptr;
    };
    put("precision", r.precision);
    put("recall", r.recall);
    put("f1", r.f1);
    put("precision_lenient", r.precision_lenient);
    put("recall_lenient", r.recall_lenient);
    put("f1_lenient", r.f1_lenient);
    out["variants"].push_back(std::move(v));
  }
  return out;
}

inline void write_anomaly_csv(const std::filesystem::path& path,
                              const std::map<VariantKey, std::vector<ScoredRecord>>& grouped) {
  std::string csv =
      "model,catalog,strategy,rejection,tp,fp,fn,tn,malformed,"
      "precision,recall,f1,precision_lenient,recall_lenient,f1_lenient\n";
  for (const auto& [key, recs] : grouped) {
    AnomalyReport r = anomaly_prf(recs);
    csv += key.model + "," + key.catalog + "," + key.strategy + "," +
           (key.rejection_enabled ? "reject" : "standard") + "," + std::to_string(r.tp) +
           "," + std::to_string(r.fp) + "," + std::to_string(r.fn) + "," +
           std::to_string(r.tn) + "," + std::to_string(r.malformed) + "," +
           detail::csv_opt(r.precision) + "," + detail::csv_opt(r.recall) + "," +
           detail::csv_opt(r.f1) + "," + detail::csv_opt(r.precision_lenient) + "," +
           detail::csv_opt(r.recall_lenient) + "," + detail::csv_opt(r.f1_lenient) + "\n";
  }
  atomic_write_file(path, csv);
}

// ---------------------------------------------------------------------------
// Selective classification report, grouped by corruption severity or by
// ambiguity bin. Also pairs up rejection-on/off variants that differ only in
// the rejection clause so plots can show the two curves side by side.
// ---------------------------------------------------------------------------

inline nlohmann::json selective_report_json(
    const std::map<VariantKey, std::vector<ScoredRecord>>& grouped, GroupKey group_key,
    const Provenance& prov) {
  nlohmann::json out;
  out["kind"] = "selective_classification";
  out["provenance"] = prov.to_json();
  out["group_key"] = group_key == GroupKey::kSeverity ? "severity" : "ambiguity_bin";
  out["variants"] = nlohmann::json::array();
  for (const auto& [key, recs] : grouped) {
    nlohmann::json v;
    v["model"] = key.model;
    v["catalog"] = key.catalog;
    v["strategy"] = key.strategy;
    v["rejection_enabled"] = key.rejection_enabled;
    v["groups"] = nlohmann::json::array();
    for (const auto& g : selective_report(recs, group_key).groups) {
      nlohmann::json gj;
      gj["group"] = g.group;
      gj["n_total"] = g.n_total;
      gj["n_rejected"] = g.n_rejected;
      gj["n_malformed"] = g.n_malformed;
      gj["n_classified"] = g.n_classified;
      gj["n_correct"] = g.n_correct;
      if (g.accuracy_on_classified)
        gj["accuracy_on_classified"] = *g.accuracy_on_classified;
      else
        gj["accuracy_on_classified"] = nullptr;
      gj["rejection_rate"] = g.rejection_rate;
      v["groups"].push_back(std::move(gj));
    }
    out["variants"].push_back(std::move(v));
  }

  // Pair each rejection-enabled variant with its clause-free twin.
  out["comparisons"] = nlohmann::json::array();
  for (const auto& [key, recs] : grouped) {
    if (!key.rejection_enabled) continue;
    VariantKey twin = key;
    twin.rejection_enabled = false;
    auto it = grouped.find(twin);
    if (it == grouped.end()) continue;
    auto with_rej = selective_report(recs, group_key).groups;
    auto without = selective_report(it->second, group_key).groups;
    std::map<int, std::pair<const SelectiveGroup*, const SelectiveGroup*>> by_group;
    for (const auto& g : with_rej) by_group[g.group].first = &g;
    for (const auto& g : without) by_group[g.group].second = &g;
    nlohmann::json cmp;
    cmp["model"] = key.model;
    cmp["catalog"] = key.catalog;
    cmp["strategy"] = key.strategy;
    cmp["groups"] = nlohmann::json::array();
    for (const auto& [grp, pair] : by_group) {
      nlohmann::json gj;
      gj["group"] = grp;
      auto acc = [](const SelectiveGroup* g) -> nlohmann::json {
        if (g && g->accuracy_on_classified) return *g->accuracy_on_classified;
        return nullptr;
      };
      gj["accuracy_with_rejection"] = acc(pair.first);
      gj["accuracy_without_rejection"] = acc(pair.second);
      gj["rejection_rate"] = pair.first ? nlohmann::json(pair.first->rejection_rate)
                                        : nlohmann::json(nullptr);
      cmp["groups"].push_back(std::move(gj));
    }
    out["comparisons"].push_back(std::move(cmp));
  }
  return out;
}

inline void write_selective_csv(
    const std::filesystem::path& path,
    const std::map<VariantKey, std::vector<ScoredRecord>>& grouped, GroupKey group_key) {
  std::string csv =
      "model,catalog,strategy,rejection,group,n_total,n_rejected,n_malformed,"
      "n_classified,n_correct,accuracy_on_classified,rejection_rate\n";
  for (const auto& [key, recs] : grouped) {
    for (const auto& g : selective_report(recs, group_key).groups) {
      csv += key.model + "," + key.catalog + "," + key.strategy + "," +
             (key.rejection_enabled ? "reject" : "standard") + "," +
             std::to_string(g.group) + "," + std::to_string(g.n_total) + "," +
             std::to_string(g.n_rejected) + "," + std::to_string(g.n_malformed) + "," +
             std::to_string(g.n_classified) + "," + std::to_string(g.n_correct) + "," +
             detail::csv_opt(g.accuracy_on_classified) + "," +
             std::to_string(g.rejection_rate) + "\n";
    }
  }
  atomic_write_file(path, csv);
}

// Renders the paired accuracy curves (solid = rejection prompt, dashed =
// plain prompt) plus each rejection variant's rejection-rate curve.
inline void write_selective_svg(
    const std::filesystem::path& path,
    const std::map<VariantKey, std::vector<ScoredRecord>>& grouped, GroupKey group_key,
    const std::string& title) {
  std::vector<ChartSeries> series;
  for (const auto& [key, recs] : grouped) {
    ChartSeries acc;
    acc.name = key.model + " " + key.strategy +
               (key.rejection_enabled ? " (reject)" : " (plain)");
    acc.dashed = !key.rejection_enabled;
    ChartSeries rej;
    rej.name = key.model + " " + key.strategy + " reject-rate";
    rej.dashed = true;
    for (const auto& g : selective_report(recs, group_key).groups) {
      if (g.accuracy_on_classified)
        acc.points.emplace_back(g.group, *g.accuracy_on_classified);
      rej.points.emplace_back(g.group, g.rejection_rate);
    }
    series.push_back(std::move(acc));
    if (key.rejection_enabled) series.push_back(std::move(rej));
  }
  std::string x = group_key == GroupKey::kSeverity ? "corruption severity" : "ambiguity bin";
  atomic_write_file(path, render_line_chart(title, x, "accuracy / rejection rate", series));
}

// ---------------------------------------------------------------------------
// Caption diversity report.
// ---------------------------------------------------------------------------

inline nlohmann::json diversity_score_to_json(const DiversityScore& s) {
  return {{"sample_id", s.sample_id},
          {"k", s.k},
          {"score", s.score},
          {"embedding_model_id", s.embedding_model_id}};
}

inline DiversityScore diversity_score_from_json(const nlohmann::json& j) {
  DiversityScore s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.k = j.at("k").get<int>();
  s.score = j.at("score").get<double>();
  s.embedding_model_id = j.at("embedding_model_id").get<std::string>();
  return s;
}

inline void write_diversity_scores(const std::filesystem::path& path,
                                   const std::vector<DiversityScore>& scores) {
  std::string body;
  for (const auto& s : scores) body += diversity_score_to_json(s).dump() + "\n";
  atomic_write_file(path, body);
}

inline std::vector<DiversityScore> load_diversity_scores(const std::filesystem::path& path) {
  std::vector<DiversityScore> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    out.push_back(diversity_score_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

// Per-severity (or per-bin) mean diversity, with optional split against a
// classification log: did samples the classifier rejected caption more
// diversely than samples it labeled?
inline nlohmann::json diversity_report_json(
    const std::vector<DiversityScore>& scores, const Manifest& manifest,
    const std::vector<QueryRecord>& classification_records, GroupKey group_key,
    const Provenance& prov) {
  auto idx = detail::index_manifest(manifest);
  nlohmann::json out;
  out["kind"] = "caption_diversity";
  out["provenance"] = prov.to_json();
  out["group_key"] = group_key == GroupKey::kSeverity ? "severity" : "ambiguity_bin";
  out["n_scored"] = scores.size();

  double total = 0;
  std::map<int, std::pair<double, int>> by_group;  // group -> (sum, n)
  for (const auto& s : scores) {
    auto it = idx.find(s.sample_id);
    if (it == idx.end())
      throw ValidationError("diversity score references sample '" + s.sample_id +
                            "' absent from the manifest");
    total += s.score;
    int group = 0;
    if (group_key == GroupKey::kSeverity) {
      group = it->second->severity;
    } else {
      if (!it->second->ambiguity_bin)
        throw ValidationError("sample '" + s.sample_id + "' carries no ambiguity bin");
      group = *it->second->ambiguity_bin;
    }
    auto& acc = by_group[group];
    acc.first += s.score;
    acc.second += 1;
  }
  out["mean_score"] =
      scores.empty() ? nlohmann::json(nullptr) : nlohmann::json(total / double(scores.size()));
  out["groups"] = nlohmann::json::array();
  for (const auto& [grp, acc] : by_group)
    out["groups"].push_back({{"group", grp},
                             {"n", acc.second},
                             {"mean_score", acc.first / double(acc.second)}});

  if (!classification_records.empty()) {
    std::vector<ScoredRecord> scored;
    for (const auto& rec : classification_records) {
      auto it = idx.find(rec.sample_id);
      if (it == idx.end())
        throw ValidationError("record references sample '" + rec.sample_id +
                              "' absent from the manifest");
      scored.push_back(detail::score_record(rec, *it->second));
    }
    auto split_json = [](const DiversitySplit& sp) {
      nlohmann::json j;
      j["rejected_mean"] =
          sp.rejected_mean ? nlohmann::json(*sp.rejected_mean) : nlohmann::json(nullptr);
      j["classified_mean"] =
          sp.classified_mean ? nlohmann::json(*sp.classified_mean) : nlohmann::json(nullptr);
      j["n_rejected"] = sp.n_rejected;
      j["n_classified"] = sp.n_classified;
      j["n_malformed"] = sp.n_malformed;
      j["n_score_only"] = sp.n_score_only;
      j["n_record_only"] = sp.n_record_only;
      return j;
    };
    out["split_overall"] = split_json(diversity_split(scores, scored));
    out["split_by_group"] = nlohmann::json::array();
    for (const auto& [grp, sp] : diversity_split_by(scores, scored, group_key)) {
      nlohmann::json j = split_json(sp);
      j["group"] = grp;
      out["split_by_group"].push_back(std::move(j));
    }
  }
  return out;
}

inline void write_diversity_csv(const std::filesystem::path& path,
                                const nlohmann::json& report) {
  std::string csv = "group,n,mean_score\n";
  for (const auto& g : report.at("groups"))
    csv += std::to_string(g.at("group").get<int>()) + "," +
           std::to_string(g.at("n").get<int>()) + "," +
           std::to_string(g.at("mean_score").get<double>()) + "\n";
  atomic_write_file(path, csv);
}

inline void write_diversity_svg(const std::filesystem::path& path,
                                const nlohmann::json& report, const std::string& title) {
  std::vector<ChartSeries> series;
  ChartSeries mean;
  mean.name = "mean diversity";
  for (const auto& g : report.at("groups"))
    mean.points.emplace_back(g.at("group").get<int>(), g.at("mean_score").get<double>());
  series.push_back(std::move(mean));
  if (report.contains("split_by_group")) {
    ChartSeries rej, cls;
    rej.name = "rejected samples";
    cls.name = "classified samples";
    cls.dashed = true;
    for (const auto& g : report.at("split_by_group")) {
      double grp = g.at("group").get<int>();
      if (!g.at("rejected_mean").is_null())
        rej.points.emplace_back(grp, g.at("rejected_mean").get<double>());
      if (!g.at("classified_mean").is_null())
        cls.points.emplace_back(grp, g.at("classified_mean").get<double>());
    }
    series.push_back(std::move(rej));
    series.push_back(std::move(cls));
  }
  std::string x = report.at("group_key").get<std::string>() == "severity"
                      ? "corruption severity"
                      : "ambiguity bin";
  atomic_write_file(path, render_line_chart(title, x, "caption diversity", series));
}

}  // namespace vlmuq
