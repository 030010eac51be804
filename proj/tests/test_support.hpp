#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmuq/image.hpp"
#include "vlmuq/metrics.hpp"
#include "vlmuq/png_io.hpp"
#include "vlmuq/util.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "vlmuq_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Deterministic textured image: distinct per seed, enough structure that blur
// and pixelation visibly change it.
inline vlmuq::Image make_test_image(int w, int h, uint64_t seed) {
  vlmuq::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint64_t v = vlmuq::splitmix64(seed ^ (uint64_t(y) * 131071 + uint64_t(x)));
      uint8_t* p = img.px(x, y);
      p[0] = uint8_t((x * 255) / std::max(1, w - 1));
      p[1] = uint8_t((y * 255) / std::max(1, h - 1));
      p[2] = uint8_t(v & 0xff);
    }
  return img;
}

// Writes `per_class` distinct PNGs under <root>/<class_index>/ for each class.
inline void write_class_tree(const std::filesystem::path& root,
                             const std::vector<int>& class_indices, int per_class,
                             int size = 24) {
  for (int cls : class_indices) {
    auto dir = root / std::to_string(cls);
    std::filesystem::create_directories(dir);
    for (int i = 0; i < per_class; ++i)
      vlmuq::write_png(dir / ("img_" + std::to_string(i) + ".png"),
                       make_test_image(size, size, uint64_t(cls) * 1000 + i));
  }
}

// ---------------------------------------------------------------------------
// Independent brute-force recounts, deliberately structured differently from
// the library implementations.
// ---------------------------------------------------------------------------

inline vlmuq::AnomalyReport naive_anomaly(const std::vector<vlmuq::ScoredRecord>& recs) {
  vlmuq::AnomalyReport r;
  for (const auto& x : recs)
    if (x.outcome == vlmuq::Outcome::kMalformed) {
      r.malformed++;
      r.malformed_anomaly += x.truth_anomaly ? 1 : 0;
    }
  for (const auto& x : recs)
    if (x.outcome == vlmuq::Outcome::kRejected && x.truth_anomaly) r.tp++;
  for (const auto& x : recs)
    if (x.outcome == vlmuq::Outcome::kRejected && !x.truth_anomaly) r.fp++;
  for (const auto& x : recs)
    if (x.outcome == vlmuq::Outcome::kLabel && x.truth_anomaly) r.fn++;
  for (const auto& x : recs)
    if (x.outcome == vlmuq::Outcome::kLabel && !x.truth_anomaly) r.tn++;
  auto frac = [](int64_t a, int64_t b) -> std::optional<double> {
    if (b == 0) return std::nullopt;
    return double(a) / double(b);
  };
  r.precision = frac(r.tp, r.tp + r.fp);
  r.recall = frac(r.tp, r.tp + r.fn);
  r.f1 = frac(2 * r.tp, 2 * r.tp + r.fp + r.fn);
  r.precision_lenient = r.precision;
  r.recall_lenient = frac(r.tp, r.tp + r.fn + r.malformed_anomaly);
  r.f1_lenient = frac(2 * r.tp, 2 * r.tp + r.fp + r.fn + r.malformed_anomaly);
  return r;
}

inline bool same_opt(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

inline bool anomaly_reports_equal(const vlmuq::AnomalyReport& a,
                                  const vlmuq::AnomalyReport& b) {
  return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.tn == b.tn &&
         a.malformed == b.malformed && a.malformed_anomaly == b.malformed_anomaly &&
         same_opt(a.precision, b.precision) && same_opt(a.recall, b.recall) &&
         same_opt(a.f1, b.f1) && same_opt(a.precision_lenient, b.precision_lenient) &&
         same_opt(a.recall_lenient, b.recall_lenient) &&
         same_opt(a.f1_lenient, b.f1_lenient);
}

inline std::vector<vlmuq::SelectiveGroup> naive_selective(
    const std::vector<vlmuq::ScoredRecord>& recs, vlmuq::GroupKey key) {
  std::map<int, std::vector<const vlmuq::ScoredRecord*>> buckets;
  for (const auto& x : recs) {
    int g = key == vlmuq::GroupKey::kSeverity ? x.severity : x.ambiguity_bin.value();
    buckets[g].push_back(&x);
  }
  std::vector<vlmuq::SelectiveGroup> out;
  for (const auto& [g, items] : buckets) {
    vlmuq::SelectiveGroup sg;
    sg.group = g;
    sg.n_total = int64_t(items.size());
    for (const auto* x : items) {
      if (x->outcome == vlmuq::Outcome::kRejected) sg.n_rejected++;
      if (x->outcome == vlmuq::Outcome::kMalformed) sg.n_malformed++;
      if (x->outcome == vlmuq::Outcome::kLabel) {
        sg.n_classified++;
        if (!x->truth_anomaly && x->pred_class == x->truth_class) sg.n_correct++;
      }
    }
    if (sg.n_classified > 0)
      sg.accuracy_on_classified = double(sg.n_correct) / double(sg.n_classified);
    sg.rejection_rate = double(sg.n_rejected) / double(sg.n_total);
    out.push_back(sg);
  }
  return out;
}

inline bool selective_groups_equal(const std::vector<vlmuq::SelectiveGroup>& a,
                                   const std::vector<vlmuq::SelectiveGroup>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].group != b[i].group || a[i].n_total != b[i].n_total ||
        a[i].n_rejected != b[i].n_rejected || a[i].n_malformed != b[i].n_malformed ||
        a[i].n_classified != b[i].n_classified || a[i].n_correct != b[i].n_correct ||
        !same_opt(a[i].accuracy_on_classified, b[i].accuracy_on_classified) ||
        a[i].rejection_rate != b[i].rejection_rate)
      return false;
  }
  return true;
}

// Plain-loop diversity: mean pairwise cosine, no fast paths.
inline double naive_diversity(const std::vector<std::vector<double>>& vs) {
  double sum = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < vs.size(); ++i)
    for (size_t j = i + 1; j < vs.size(); ++j) {
      double dot = 0, na = 0, nb = 0;
      for (size_t d = 0; d < vs[i].size(); ++d) {
        dot += vs[i][d] * vs[j][d];
        na += vs[i][d] * vs[i][d];
        nb += vs[j][d] * vs[j][d];
      }
      sum += dot / (std::sqrt(na) * std::sqrt(nb));
      ++pairs;
    }
  return 1.0 - sum / double(pairs);
}

// Randomized record sets exercising every outcome/truth combination.
inline std::vector<vlmuq::ScoredRecord> random_records(std::mt19937_64& rng, bool with_bins) {
  static const std::vector<std::string> classes = {"cat", "dog", "ship", "truck"};
  std::uniform_int_distribution<int> n_dist(1, 40);
  std::uniform_int_distribution<int> pct(0, 99);
  std::uniform_int_distribution<int> sev(0, 5);
  std::uniform_int_distribution<int> bin(1, 3);
  std::uniform_int_distribution<size_t> cls(0, classes.size() - 1);
  int n = n_dist(rng);
  std::vector<vlmuq::ScoredRecord> recs;
  recs.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    vlmuq::ScoredRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.truth_anomaly = pct(rng) < 40;
    if (!r.truth_anomaly) r.truth_class = classes[cls(rng)];
    int o = pct(rng);
    if (o < 50) {
      r.outcome = vlmuq::Outcome::kLabel;
      r.pred_class = pct(rng) < 60 && !r.truth_class.empty() ? r.truth_class
                                                             : classes[cls(rng)];
    } else if (o < 80) {
      r.outcome = vlmuq::Outcome::kRejected;
    } else {
      r.outcome = vlmuq::Outcome::kMalformed;
    }
    r.severity = sev(rng);
    if (with_bins) r.ambiguity_bin = bin(rng);
    recs.push_back(std::move(r));
  }
  return recs;
}

}  // namespace testutil
