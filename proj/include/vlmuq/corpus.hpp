#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmuq/class_map.hpp"
#include "vlmuq/corruptions.hpp"
#include "vlmuq/ecg_synth.hpp"
#include "vlmuq/manifest.hpp"
#include "vlmuq/png_io.hpp"
#include "vlmuq/rng.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

namespace detail {

struct LabeledFile {
  int class_index;
  std::filesystem::path path;
};

// Walks a tree of <class_index>/<image>.png directories. Iteration order is
// normalized by sorting so sampling is reproducible.
inline std::vector<LabeledFile> collect_labeled_tree(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw ValidationError("source tree is not a directory: " + root.string());
  std::vector<LabeledFile> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;  // stray files at the root are ignored
    std::string name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(),
                                     [](unsigned char c) { return std::isdigit(c); }))
      throw ValidationError("source tree directory is not a class index: " + name);
    int index = std::stoi(name);
    for (const auto& f : fs::directory_iterator(entry.path())) {
      if (f.is_regular_file() && f.path().extension() == ".png")
        files.push_back({index, f.path()});
    }
  }
  std::sort(files.begin(), files.end(), [](const LabeledFile& a, const LabeledFile& b) {
    if (a.class_index != b.class_index) return a.class_index < b.class_index;
    return a.path.filename().string() < b.path.filename().string();
  });
  return files;
}

// Sorted .png listing of one directory.
inline std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw ValidationError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.is_regular_file() && f.path().extension() == ".png") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  return files;
}

// Byte-copies src into <out_dir>/images/<id>.png and fills the bookkeeping
// fields that depend on the file.
inline void place_copy(ImageSample& s, const std::filesystem::path& src,
                       const std::filesystem::path& out_dir) {
  s.file = "images/" + s.id + ".png";
  copy_file_bytes(src, out_dir / s.file);
  s.source = src.string();
  s.sha256 = sha256_file(out_dir / s.file);
}

}  // namespace detail

// Samples n_in images whose class index the map covers (kept with the mapped
// class as truth) and n_anom images whose index it does not (truth = anomaly),
// copying each into out_dir. Deterministic given seed.
inline Manifest build_cifar_vs_not(const std::filesystem::path& source_dir,
                                   const ClassMap& map, int n_in, int n_anom,
                                   uint64_t seed, const std::filesystem::path& out_dir) {
  if (n_in < 0 || n_anom < 0) throw ValidationError("negative sample count");
  std::vector<detail::LabeledFile> all = detail::collect_labeled_tree(source_dir);
  std::vector<detail::LabeledFile> in_space, anomalies;
  for (const auto& f : all)
    (map.contains(f.class_index) ? in_space : anomalies).push_back(f);
  if (static_cast<int>(in_space.size()) < n_in)
    throw ValidationError("insufficient in-label-space images: need " +
                          std::to_string(n_in) + ", found " + std::to_string(in_space.size()));
  if (static_cast<int>(anomalies.size()) < n_anom)
    throw ValidationError("insufficient anomaly images: need " + std::to_string(n_anom) +
                          ", found " + std::to_string(anomalies.size()));

  std::mt19937_64 rng(seed);
  deterministic_shuffle(in_space, rng);
  deterministic_shuffle(anomalies, rng);

  Manifest m;
  for (int i = 0; i < n_in; ++i) {
    const auto& f = in_space[i];
    ImageSample s;
    s.id = "cifar_in_" + format_index(i);
    s.task = TaskKind::kCifarVsNot;
    s.anomaly = false;
    s.class_name = *map.lookup(f.class_index);
    detail::place_copy(s, f.path, out_dir);
    m.entries.push_back(std::move(s));
  }
  for (int i = 0; i < n_anom; ++i) {
    const auto& f = anomalies[i];
    ImageSample s;
    s.id = "cifar_anom_" + format_index(i);
    s.task = TaskKind::kCifarVsNot;
    s.anomaly = true;
    detail::place_copy(s, f.path, out_dir);
    m.entries.push_back(std::move(s));
  }
  m.meta = {{"task", task_kind_name(TaskKind::kCifarVsNot)},
            {"n_in", n_in},
            {"n_anomaly", n_anom},
            {"seed", seed},
            {"source_dir", source_dir.string()}};
  m.validate();
  return m;
}

// n_each pre-rendered normal and abnormal traces plus n_each synthesized
// anomaly images, each anomaly from a per-sample derived seed.
inline Manifest build_ecg_corpus(const std::filesystem::path& normal_dir,
                                 const std::filesystem::path& abnormal_dir, int n_each,
                                 uint64_t seed, const std::filesystem::path& out_dir,
                                 const EcgAnomalySpec& base_spec = {}) {
  if (n_each < 0) throw ValidationError("negative sample count");
  std::mt19937_64 rng(seed);
  Manifest m;

  auto add_role = [&](const std::filesystem::path& dir, const std::string& role) {
    std::vector<std::filesystem::path> files = detail::list_pngs(dir);
    if (static_cast<int>(files.size()) < n_each)
      throw ValidationError("insufficient " + role + " images: need " +
                            std::to_string(n_each) + ", found " +
                            std::to_string(files.size()));
    deterministic_shuffle(files, rng);
    for (int i = 0; i < n_each; ++i) {
      ImageSample s;
      s.id = "ecg_" + role + "_" + format_index(i);
      s.task = TaskKind::kEcgVsNot;
      s.anomaly = false;
      s.class_name = role;
      detail::place_copy(s, files[i], out_dir);
      m.entries.push_back(std::move(s));
    }
  };
  add_role(normal_dir, "normal");
  add_role(abnormal_dir, "abnormal");

  for (int i = 0; i < n_each; ++i) {
    ImageSample s;
    s.id = "ecg_anom_" + format_index(i);
    s.task = TaskKind::kEcgVsNot;
    s.anomaly = true;
    EcgAnomalySpec spec = base_spec;
    spec.seed = splitmix64(seed ^ fnv1a64(s.id));
    std::string png = encode_png(generate_ecg_anomaly(spec));
    s.file = "images/" + s.id + ".png";
    atomic_write_file(out_dir / s.file, png);
    s.source = "seed:" + std::to_string(spec.seed);
    s.sha256 = sha256_hex(png);
    m.entries.push_back(std::move(s));
  }

  m.meta = {{"task", task_kind_name(TaskKind::kEcgVsNot)},
            {"n_each", n_each},
            {"seed", seed},
            {"empty", n_each == 0}};
  m.validate();
  return m;
}

// Selects n in-label-space images once, then emits the same set clean
// (severity 0, byte-identical copies) and under every (kind, severity) pair.
inline Manifest build_corruption_grid(const std::filesystem::path& source_dir,
                                      const ClassMap& map, int n,
                                      const std::vector<CorruptionKind>& kinds,
                                      const std::vector<int>& severities, uint64_t seed,
                                      const std::filesystem::path& out_dir,
                                      const CorruptionTables& tables = {}) {
  if (n <= 0) throw ValidationError("grid needs a positive sample count");
  for (int sev : severities)
    if (sev < 1 || sev > 5) throw ValidationError("grid severity out of [1,5]");
  std::vector<detail::LabeledFile> in_space;
  for (const auto& f : detail::collect_labeled_tree(source_dir))
    if (map.contains(f.class_index)) in_space.push_back(f);
  if (static_cast<int>(in_space.size()) < n)
    throw ValidationError("insufficient in-label-space images: need " + std::to_string(n) +
                          ", found " + std::to_string(in_space.size()));

  std::mt19937_64 rng(seed);
  deterministic_shuffle(in_space, rng);

  Manifest m;
  for (int i = 0; i < n; ++i) {
    const auto& f = in_space[i];
    std::string src_id = "grid_" + format_index(i);
    std::string cls = *map.lookup(f.class_index);

    ImageSample clean;
    clean.id = src_id + "@clean_s0";
    clean.task = TaskKind::kImagenetcReject;
    clean.anomaly = false;
    clean.class_name = cls;
    detail::place_copy(clean, f.path, out_dir);
    m.entries.push_back(clean);

    Image img = read_png(f.path);
    for (CorruptionKind kind : kinds) {
      for (int sev : severities) {
        ImageSample s;
        s.id = src_id + "@" + corruption_kind_name(kind) + "_s" + std::to_string(sev);
        s.task = TaskKind::kImagenetcReject;
        s.anomaly = false;
        s.class_name = cls;
        s.severity = sev;
        s.corruption_kind = corruption_kind_name(kind);
        uint64_t noise_seed = splitmix64(seed ^ fnv1a64(s.id));
        std::string png = encode_png(apply_corruption(img, kind, sev, noise_seed, tables));
        s.file = "images/" + s.id + ".png";
        atomic_write_file(out_dir / s.file, png);
        s.source = f.path.string();
        s.sha256 = sha256_hex(png);
        m.entries.push_back(std::move(s));
      }
    }
  }

  std::vector<std::string> kind_names;
  for (CorruptionKind k : kinds) kind_names.push_back(corruption_kind_name(k));
  m.meta = {{"task", task_kind_name(TaskKind::kImagenetcReject)},
            {"n_sources", n},
            {"kinds", kind_names},
            {"severities", severities},
            {"seed", seed},
            {"source_dir", source_dir.string()}};
  m.validate();
  return m;
}

// Annotator-disagreement level from the vote fraction of the winning label:
// near-unanimous (0.75, 1.0] -> 1, (0.5, 0.75] -> 2, most contested (0, 0.5] -> 3.
// Right-closed bins so the boundaries 0.75 and 0.5 fall into the lower level;
// an exact 0 joins the most-contested bin.
inline int bin_galaxy_disagreement(double leaf_prob) {
  if (!(leaf_prob >= 0.0 && leaf_prob <= 1.0))
    throw ValidationError("leaf_prob out of [0,1]: " + std::to_string(leaf_prob));
  if (leaf_prob > 0.75) return 1;
  if (leaf_prob > 0.5) return 2;
  return 3;
}

inline const std::vector<std::string>& galaxy_classes() {
  static const std::vector<std::string> classes = {"smooth_round", "smooth_cigar",
                                                   "edge_on_disk", "unbarred_spiral"};
  return classes;
}

// Reads a metadata table (header "id,leaf_prob,label"; one row per image in
// image_dir named <id>.png), samples n rows uniformly, and copies the images.
inline Manifest ingest_galaxy(const std::filesystem::path& metadata_csv,
                              const std::filesystem::path& image_dir, int n,
                              uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 0) throw ValidationError("negative sample count");
  std::ifstream in(metadata_csv);
  if (!in) throw ValidationError("cannot open metadata: " + metadata_csv.string());

  struct Row {
    std::string id;
    double leaf_prob;
    std::string label;
  };
  std::vector<Row> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("id,", 0) == 0) continue;  // header
    size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ValidationError("metadata line " + std::to_string(line_no) + ": need 3 columns");
    Row r;
    r.id = trim(line.substr(0, c1));
    try {
      r.leaf_prob = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    } catch (const std::exception&) {
      throw ValidationError("metadata line " + std::to_string(line_no) + ": bad leaf_prob");
    }
    r.label = trim(line.substr(c2 + 1));
    const auto& classes = galaxy_classes();
    if (std::find(classes.begin(), classes.end(), r.label) == classes.end())
      throw ValidationError("metadata line " + std::to_string(line_no) +
                            ": label '" + r.label + "' is not a known galaxy class");
    rows.push_back(std::move(r));
  }
  if (static_cast<int>(rows.size()) < n)
    throw ValidationError("insufficient metadata rows: need " + std::to_string(n) +
                          ", found " + std::to_string(rows.size()));

  std::mt19937_64 rng(seed);
  deterministic_shuffle(rows, rng);

  Manifest m;
  for (int i = 0; i < n; ++i) {
    const Row& r = rows[i];
    ImageSample s;
    s.id = "galaxy_" + r.id;
    s.task = TaskKind::kGalaxyReject;
    s.anomaly = false;
    s.class_name = r.label;
    s.ambiguity_bin = bin_galaxy_disagreement(r.leaf_prob);
    std::filesystem::path src = image_dir / (r.id + ".png");
    if (!std::filesystem::exists(src))
      throw ValidationError("missing galaxy image: " + src.string());
    detail::place_copy(s, src, out_dir);
    m.entries.push_back(std::move(s));
  }
  m.meta = {{"task", task_kind_name(TaskKind::kGalaxyReject)},
            {"n", n},
            {"seed", seed},
            {"metadata", metadata_csv.string()}};
  m.validate();
  return m;
}

}  // namespace vlmuq
