#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmuq/util.hpp"

namespace vlmuq {

enum class TaskKind { kCifarVsNot, kEcgVsNot, kImagenetcReject, kGalaxyReject };

inline const char* task_kind_name(TaskKind t) {
  switch (t) {
    case TaskKind::kCifarVsNot: return "cifar_vs_not";
    case TaskKind::kEcgVsNot: return "ecg_vs_not";
    case TaskKind::kImagenetcReject: return "imagenetc_reject";
    case TaskKind::kGalaxyReject: return "galaxy_reject";
  }
  return "?";
}

inline TaskKind task_kind_from_name(const std::string& name) {
  if (name == "cifar_vs_not") return TaskKind::kCifarVsNot;
  if (name == "ecg_vs_not") return TaskKind::kEcgVsNot;
  if (name == "imagenetc_reject") return TaskKind::kImagenetcReject;
  if (name == "galaxy_reject") return TaskKind::kGalaxyReject;
  throw ValidationError("unknown task kind: " + name);
}

// One evaluation image plus its ground-truth role.
struct ImageSample {
  std::string id;
  std::string file;  // relative to the manifest's directory
  TaskKind task = TaskKind::kCifarVsNot;
  bool anomaly = false;                   // truth = Anomaly
  std::string class_name;                 // set iff !anomaly
  int severity = 0;                       // 0 = clean
  std::string corruption_kind;            // empty for clean / non-grid tasks
  std::optional<int> ambiguity_bin;       // galaxy only, 1..3
  std::string source;                     // original path or generator seed
  std::string sha256;

  void validate() const {
    if (id.empty()) throw ValidationError("sample with empty id");
    if (severity < 0 || severity > 5)
      throw ValidationError("sample " + id + ": severity out of [0,5]");
    if (anomaly && !class_name.empty())
      throw ValidationError("sample " + id + ": anomaly with class name");
    if (!anomaly && class_name.empty())
      throw ValidationError("sample " + id + ": in-label-space sample without class");
    bool galaxy = task == TaskKind::kGalaxyReject;
    if (galaxy != ambiguity_bin.has_value())
      throw ValidationError("sample " + id + ": ambiguity_bin present iff galaxy task");
    if (ambiguity_bin && (*ambiguity_bin < 1 || *ambiguity_bin > 3))
      throw ValidationError("sample " + id + ": ambiguity_bin out of [1,3]");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["file"] = file;
    j["task"] = task_kind_name(task);
    j["truth"] = anomaly ? "anomaly" : "in_label_space";
    j["class"] = anomaly ? nlohmann::json(nullptr) : nlohmann::json(class_name);
    j["severity"] = severity;
    j["kind"] = corruption_kind.empty() ? nlohmann::json(nullptr)
                                        : nlohmann::json(corruption_kind);
    j["ambiguity_bin"] = ambiguity_bin ? nlohmann::json(*ambiguity_bin)
                                       : nlohmann::json(nullptr);
    j["source"] = source;
    j["sha256"] = sha256;
    return j;
  }

  static ImageSample from_json(const nlohmann::json& j) {
    ImageSample s;
    s.id = j.at("id").get<std::string>();
    s.file = j.at("file").get<std::string>();
    s.task = task_kind_from_name(j.at("task").get<std::string>());
    s.anomaly = j.at("truth").get<std::string>() == "anomaly";
    if (j.contains("class") && !j["class"].is_null())
      s.class_name = j["class"].get<std::string>();
    s.severity = j.value("severity", 0);
    if (j.contains("kind") && !j["kind"].is_null())
      s.corruption_kind = j["kind"].get<std::string>();
    if (j.contains("ambiguity_bin") && !j["ambiguity_bin"].is_null())
      s.ambiguity_bin = j["ambiguity_bin"].get<int>();
    s.source = j.value("source", "");
    s.sha256 = j.value("sha256", "");
    return s;
  }
};

// Ordered sample list plus task-level metadata. Entries persist as JSON lines
// (<name>.jsonl); metadata as a sidecar <name>.meta.json.
struct Manifest {
  std::vector<ImageSample> entries;
  nlohmann::json meta = nlohmann::json::object();

  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries) {
      e.validate();
      if (!ids.insert(e.id).second) throw ValidationError("duplicate sample id: " + e.id);
    }
  }

  void save(const std::filesystem::path& jsonl_path) const {
    validate();
    std::string body;
    for (const auto& e : entries) {
      body += e.to_json().dump();
      body += '\n';
    }
    atomic_write_file(jsonl_path, body);
    std::filesystem::path meta_path = jsonl_path;
    meta_path.replace_extension(".meta.json");
    atomic_write_file(meta_path, meta.dump(2) + "\n");
  }

  static Manifest load(const std::filesystem::path& jsonl_path) {
    Manifest m;
    std::ifstream in(jsonl_path);
    if (!in) throw ValidationError("cannot open manifest: " + jsonl_path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        m.entries.push_back(ImageSample::from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest " + jsonl_path.string() + " line " +
                              std::to_string(line_no) + ": " + e.what());
      }
    }
    std::filesystem::path meta_path = jsonl_path;
    meta_path.replace_extension(".meta.json");
    if (std::filesystem::exists(meta_path))
      m.meta = nlohmann::json::parse(read_file(meta_path));
    m.validate();
    return m;
  }

  // Checks that every referenced file exists and matches its recorded hash.
  void verify_files(const std::filesystem::path& base_dir) const {
    for (const auto& e : entries) {
      std::filesystem::path p = base_dir / e.file;
      if (!std::filesystem::exists(p))
        throw ValidationError("manifest references missing file: " + p.string());
      if (!e.sha256.empty()) {
        std::string h = sha256_file(p);
        if (h != e.sha256)
          throw ValidationError("hash mismatch for " + e.id + " (" + p.string() + ")");
      }
    }
  }
};

}  // namespace vlmuq
