#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vlmuq/parser.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

// Minimal join of a parsed model answer with its sample's ground truth;
// the only shape the metric functions need.
struct ScoredRecord {
  std::string sample_id;
  Outcome outcome = Outcome::kMalformed;
  std::string pred_class;   // set iff outcome == kLabel
  bool truth_anomaly = false;
  std::string truth_class;  // set iff !truth_anomaly
  int severity = 0;
  std::optional<int> ambiguity_bin;
};

// Binary rejection-as-detection counts. Prediction-positive means the model
// rejected; truth-positive means the sample is an anomaly. The headline trio
// excludes malformed outputs from the denominators; the lenient trio counts
// them as non-rejections instead.
struct AnomalyReport {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  int64_t malformed = 0;
  int64_t malformed_anomaly = 0;
  std::optional<double> precision, recall, f1;
  std::optional<double> precision_lenient, recall_lenient, f1_lenient;

  int64_t scored_total() const { return tp + fp + fn + tn; }
};

namespace detail {
inline std::optional<double> ratio(int64_t num, int64_t den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}
}  // namespace detail

inline AnomalyReport anomaly_prf(const std::vector<ScoredRecord>& records) {
  if (records.empty()) throw ValidationError("anomaly_prf: no records");
  AnomalyReport r;
  for (const auto& rec : records) {
    if (rec.outcome == Outcome::kMalformed) {
      ++r.malformed;
      if (rec.truth_anomaly) ++r.malformed_anomaly;
      continue;
    }
    bool rejected = rec.outcome == Outcome::kRejected;
    if (rejected && rec.truth_anomaly) ++r.tp;
    else if (rejected && !rec.truth_anomaly) ++r.fp;
    else if (!rejected && rec.truth_anomaly) ++r.fn;
    else ++r.tn;
  }
  r.precision = detail::ratio(r.tp, r.tp + r.fp);
  r.recall = detail::ratio(r.tp, r.tp + r.fn);
  r.f1 = detail::ratio(2 * r.tp, 2 * r.tp + r.fp + r.fn);
  int64_t fn_l = r.fn + r.malformed_anomaly;
  r.precision_lenient = r.precision;
  r.recall_lenient = detail::ratio(r.tp, r.tp + fn_l);
  r.f1_lenient = detail::ratio(2 * r.tp, 2 * r.tp + r.fp + fn_l);
  return r;
}

enum class GroupKey { kSeverity, kAmbiguityBin };

inline const char* group_key_name(GroupKey k) {
  switch (k) {
    case GroupKey::kSeverity: return "severity";
    case GroupKey::kAmbiguityBin: return "ambiguity_bin";
  }
  return "?";
}

struct SelectiveGroup {
  int group = 0;  // severity value or disagreement level
  int64_t n_total = 0, n_rejected = 0, n_malformed = 0, n_classified = 0, n_correct = 0;
  std::optional<double> accuracy_on_classified;
  double rejection_rate = 0.0;
};

struct SelectiveReport {
  GroupKey key = GroupKey::kSeverity;
  std::vector<SelectiveGroup> groups;  // ascending by group value
};

// Accuracy is measured only over samples the model actually labeled; the
// rejection rate is over everything in the group.
inline SelectiveReport selective_report(const std::vector<ScoredRecord>& records,
                                        GroupKey key) {
  if (records.empty()) throw ValidationError("selective_report: no records");
  std::map<int, SelectiveGroup> groups;
  for (const auto& rec : records) {
    int g;
    if (key == GroupKey::kSeverity) {
      g = rec.severity;
    } else {
      if (!rec.ambiguity_bin)
        throw ValidationError("selective_report: record " + rec.sample_id +
                              " has no ambiguity bin");
      g = *rec.ambiguity_bin;
    }
    SelectiveGroup& grp = groups[g];
    grp.group = g;
    ++grp.n_total;
    switch (rec.outcome) {
      case Outcome::kRejected: ++grp.n_rejected; break;
      case Outcome::kMalformed: ++grp.n_malformed; break;
      case Outcome::kLabel:
        ++grp.n_classified;
        if (!rec.truth_anomaly && rec.pred_class == rec.truth_class) ++grp.n_correct;
        break;
    }
  }
  SelectiveReport report;
  report.key = key;
  for (auto& [g, grp] : groups) {
    grp.accuracy_on_classified = detail::ratio(grp.n_correct, grp.n_classified);
    grp.rejection_rate = double(grp.n_rejected) / double(grp.n_total);
    report.groups.push_back(grp);
  }
  return report;
}

// Cosine similarity with an exact-equality fast path: element-wise equal
// vectors score exactly 1.0, so "identical captions diverge by 0" holds
// without floating-point slack.
inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size() || u.empty())
    throw ValidationError("cosine: dimension mismatch");
  if (u == v) {
    double norm2 = 0.0;
    for (double x : u) norm2 += x * x;
    if (norm2 == 0.0) throw ValidationError("cosine: zero-norm vector");
    return 1.0;
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

// One minus the mean pairwise cosine similarity over all k(k-1)/2 pairs.
inline double caption_diversity(const std::vector<std::vector<double>>& vectors) {
  size_t k = vectors.size();
  if (k < 2) throw ValidationError("caption_diversity: need at least 2 vectors");
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j) sum += cosine(vectors[i], vectors[j]);
  double pairs = double(k) * double(k - 1) / 2.0;
  return 1.0 - sum / pairs;
}

struct DiversityScore {
  std::string sample_id;
  int k = 0;
  double score = 0.0;
  std::string embedding_model_id;
};

struct DiversitySplit {
  std::optional<double> rejected_mean, classified_mean;
  int64_t n_rejected = 0, n_classified = 0;
  int64_t n_malformed = 0;     // joined but model output was malformed
  int64_t n_score_only = 0;    // score had no matching record
  int64_t n_record_only = 0;   // record had no matching score
};

// Joins per-sample diversity scores with classification outcomes and averages
// within the rejected and classified groups. Unjoinable ids are counted, not
// silently dropped.
inline DiversitySplit diversity_split(const std::vector<DiversityScore>& scores,
                                      const std::vector<ScoredRecord>& records) {
  std::map<std::string, const ScoredRecord*> by_id;
  for (const auto& r : records) by_id[r.sample_id] = &r;
  DiversitySplit split;
  double sum_rej = 0.0, sum_cls = 0.0;
  std::map<std::string, bool> joined;
  for (const auto& s : scores) {
    auto it = by_id.find(s.sample_id);
    if (it == by_id.end()) {
      ++split.n_score_only;
      continue;
    }
    joined[s.sample_id] = true;
    switch (it->second->outcome) {
      case Outcome::kRejected:
        ++split.n_rejected;
        sum_rej += s.score;
        break;
      case Outcome::kLabel:
        ++split.n_classified;
        sum_cls += s.score;
        break;
      case Outcome::kMalformed: ++split.n_malformed; break;
    }
  }
  for (const auto& r : records)
    if (!joined.count(r.sample_id)) ++split.n_record_only;
  if (split.n_rejected > 0) split.rejected_mean = sum_rej / double(split.n_rejected);
  if (split.n_classified > 0) split.classified_mean = sum_cls / double(split.n_classified);
  return split;
}

// Same split computed per severity (or per disagreement level): the data
// behind "diversity of rejected vs classified as corruption grows" plots.
inline std::vector<std::pair<int, DiversitySplit>> diversity_split_by(
    const std::vector<DiversityScore>& scores, const std::vector<ScoredRecord>& records,
    GroupKey key) {
  std::map<int, std::vector<ScoredRecord>> rec_groups;
  std::map<std::string, int> group_of;
  for (const auto& r : records) {
    int g;
    if (key == GroupKey::kSeverity) {
      g = r.severity;
    } else {
      if (!r.ambiguity_bin)
        throw ValidationError("diversity_split_by: record " + r.sample_id +
                              " has no ambiguity bin");
      g = *r.ambiguity_bin;
    }
    rec_groups[g].push_back(r);
    group_of[r.sample_id] = g;
  }
  std::map<int, std::vector<DiversityScore>> score_groups;
  for (const auto& s : scores) {
    auto it = group_of.find(s.sample_id);
    if (it != group_of.end()) score_groups[it->second].push_back(s);
  }
  std::vector<std::pair<int, DiversitySplit>> out;
  for (const auto& [g, recs] : rec_groups)
    out.emplace_back(g, diversity_split(score_groups[g], recs));
  return out;
}

// Expected precision/recall of a rejector that flips a coin with the given
// probability independently of the input: precision tends to the anomaly
// prevalence, recall to the coin's probability.
inline std::pair<double, double> random_baseline(int64_t n_pos, int64_t n_neg,
                                                 double reject_prob) {
  if (n_pos < 0 || n_neg < 0) throw ValidationError("random_baseline: negative counts");
  if (n_pos + n_neg == 0) throw ValidationError("random_baseline: zero total");
  if (!(reject_prob >= 0.0 && reject_prob <= 1.0))
    throw ValidationError("random_baseline: reject_prob out of [0,1]");
  double precision = double(n_pos) / double(n_pos + n_neg);
  return {precision, reject_prob};
}

}  // namespace vlmuq
