#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vlmuq/metrics.hpp"
#include "vlmuq/rng.hpp"
#include "test_support.hpp"

using namespace vlmuq;

namespace {

ScoredRecord rec(Outcome o, bool truth_anomaly, const std::string& pred = "",
                 const std::string& truth = "", int severity = 0) {
  static int counter = 0;
  ScoredRecord r;
  r.sample_id = "r" + std::to_string(counter++);
  r.outcome = o;
  r.pred_class = pred;
  r.truth_anomaly = truth_anomaly;
  r.truth_class = truth;
  r.severity = severity;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Anomaly precision / recall / F1
// ---------------------------------------------------------------------------

TEST(AnomalyPrf, HandComputedCounts) {
  // tp=2 fp=1 fn=2 tn=3, plus two malformed (one of them an anomaly).
  std::vector<ScoredRecord> recs = {
      rec(Outcome::kRejected, true),
      rec(Outcome::kRejected, true),
      rec(Outcome::kRejected, false, "", "cat"),
      rec(Outcome::kLabel, true, "dog"),
      rec(Outcome::kLabel, true, "cat"),
      rec(Outcome::kLabel, false, "cat", "cat"),
      rec(Outcome::kLabel, false, "dog", "dog"),
      rec(Outcome::kLabel, false, "dog", "cat"),
      rec(Outcome::kMalformed, true),
      rec(Outcome::kMalformed, false, "", "ship"),
  };
  AnomalyReport r = anomaly_prf(recs);
  EXPECT_EQ(r.tp, 2);
  EXPECT_EQ(r.fp, 1);
  EXPECT_EQ(r.fn, 2);
  EXPECT_EQ(r.tn, 3);
  EXPECT_EQ(r.malformed, 2);
  EXPECT_EQ(r.malformed_anomaly, 1);
  EXPECT_EQ(r.scored_total(), 8);

  ASSERT_TRUE(r.precision && r.recall && r.f1);
  EXPECT_DOUBLE_EQ(*r.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.recall, 0.5);
  EXPECT_DOUBLE_EQ(*r.f1, 4.0 / 7.0);

  // Lenient: the malformed anomaly counts as a miss; precision is unchanged
  // because malformed outputs are never rejections.
  ASSERT_TRUE(r.precision_lenient && r.recall_lenient && r.f1_lenient);
  EXPECT_DOUBLE_EQ(*r.precision_lenient, *r.precision);
  EXPECT_DOUBLE_EQ(*r.recall_lenient, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(*r.f1_lenient, 0.5);
}

TEST(AnomalyPrf, UndefinedRatiosStayNull) {
  // Model never rejects and nothing is an anomaly: every ratio is 0/0.
  std::vector<ScoredRecord> recs = {rec(Outcome::kLabel, false, "cat", "cat"),
                                    rec(Outcome::kLabel, false, "dog", "cat")};
  AnomalyReport r = anomaly_prf(recs);
  EXPECT_EQ(r.tn, 2);
  EXPECT_FALSE(r.precision.has_value());
  EXPECT_FALSE(r.recall.has_value());
  EXPECT_FALSE(r.f1.has_value());
  EXPECT_FALSE(r.recall_lenient.has_value());
  EXPECT_FALSE(r.f1_lenient.has_value());

  // All-malformed input: counted, but no scored records at all.
  std::vector<ScoredRecord> junk = {rec(Outcome::kMalformed, true),
                                    rec(Outcome::kMalformed, false, "", "cat")};
  AnomalyReport rj = anomaly_prf(junk);
  EXPECT_EQ(rj.scored_total(), 0);
  EXPECT_EQ(rj.malformed, 2);
  EXPECT_FALSE(rj.precision.has_value());
  // The lenient recall picks up the malformed anomaly in its denominator.
  ASSERT_TRUE(rj.recall_lenient.has_value());
  EXPECT_DOUBLE_EQ(*rj.recall_lenient, 0.0);
}

TEST(AnomalyPrf, EmptyInputThrows) {
  EXPECT_THROW(anomaly_prf({}), ValidationError);
}

TEST(AnomalyPrf, MatchesBruteForceRecountOnRandomSets) {
  std::mt19937_64 rng(20240817);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<ScoredRecord> recs = testutil::random_records(rng, false);
    AnomalyReport got = anomaly_prf(recs);
    AnomalyReport want = testutil::naive_anomaly(recs);
    ASSERT_TRUE(testutil::anomaly_reports_equal(got, want)) << "iteration " << iter;
  }
}

// ---------------------------------------------------------------------------
// Selective classification
// ---------------------------------------------------------------------------

TEST(Selective, HandComputedGroup) {
  std::vector<ScoredRecord> recs = {
      rec(Outcome::kRejected, false, "", "cat", 2),
      rec(Outcome::kLabel, false, "cat", "cat", 2),
      rec(Outcome::kLabel, false, "dog", "dog", 2),
      rec(Outcome::kLabel, false, "ship", "ship", 2),
      rec(Outcome::kLabel, false, "dog", "cat", 2),
  };
  SelectiveReport report = selective_report(recs, GroupKey::kSeverity);
  ASSERT_EQ(report.groups.size(), 1u);
  const SelectiveGroup& g = report.groups[0];
  EXPECT_EQ(g.group, 2);
  EXPECT_EQ(g.n_total, 5);
  EXPECT_EQ(g.n_rejected, 1);
  EXPECT_EQ(g.n_classified, 4);
  EXPECT_EQ(g.n_correct, 3);
  ASSERT_TRUE(g.accuracy_on_classified.has_value());
  EXPECT_DOUBLE_EQ(*g.accuracy_on_classified, 0.75);
  EXPECT_DOUBLE_EQ(g.rejection_rate, 0.2);
}

TEST(Selective, GroupsAreOrderedAndAccuracySkipsRejections) {
  std::vector<ScoredRecord> recs = {
      rec(Outcome::kLabel, false, "cat", "cat", 3),
      rec(Outcome::kRejected, false, "", "cat", 1),
      rec(Outcome::kMalformed, false, "", "cat", 1),
      rec(Outcome::kLabel, false, "dog", "cat", 0),
  };
  SelectiveReport report = selective_report(recs, GroupKey::kSeverity);
  ASSERT_EQ(report.groups.size(), 3u);
  EXPECT_EQ(report.groups[0].group, 0);
  EXPECT_EQ(report.groups[1].group, 1);
  EXPECT_EQ(report.groups[2].group, 3);
  // Severity 1 holds one rejection and one malformed output: no accuracy.
  EXPECT_FALSE(report.groups[1].accuracy_on_classified.has_value());
  EXPECT_DOUBLE_EQ(report.groups[1].rejection_rate, 0.5);
  EXPECT_EQ(report.groups[1].n_malformed, 1);
}

TEST(Selective, AmbiguityBinGroupingRequiresBins) {
  std::vector<ScoredRecord> recs = {rec(Outcome::kLabel, false, "cat", "cat", 0)};
  recs[0].ambiguity_bin = 2;
  SelectiveReport report = selective_report(recs, GroupKey::kAmbiguityBin);
  ASSERT_EQ(report.groups.size(), 1u);
  EXPECT_EQ(report.groups[0].group, 2);

  recs[0].ambiguity_bin.reset();
  EXPECT_THROW(selective_report(recs, GroupKey::kAmbiguityBin), ValidationError);
  EXPECT_THROW(selective_report({}, GroupKey::kSeverity), ValidationError);
}

TEST(Selective, MatchesBruteForceRecountOnRandomSets) {
  std::mt19937_64 rng(911);
  for (int iter = 0; iter < 200; ++iter) {
    bool bins = iter % 2 == 0;
    std::vector<ScoredRecord> recs = testutil::random_records(rng, bins);
    GroupKey key = bins ? GroupKey::kAmbiguityBin : GroupKey::kSeverity;
    SelectiveReport got = selective_report(recs, key);
    EXPECT_EQ(got.key, key);
    ASSERT_TRUE(testutil::selective_groups_equal(got.groups,
                                                 testutil::naive_selective(recs, key)))
        << "iteration " << iter;
  }
}

// ---------------------------------------------------------------------------
// Random-rejector baseline
// ---------------------------------------------------------------------------

TEST(RandomBaseline, ClosedFormMatchesPrevalenceAndCoin) {
  auto [p_cifar, r_cifar] = random_baseline(1200, 1800, 0.5);
  EXPECT_DOUBLE_EQ(p_cifar, 0.4);
  EXPECT_DOUBLE_EQ(r_cifar, 0.5);

  auto [p_ecg, r_ecg] = random_baseline(500, 1000, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(p_ecg, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r_ecg, 1.0 / 3.0);

  // Degenerate coins are still well-defined.
  auto [p0, r0] = random_baseline(10, 0, 0.0);
  EXPECT_DOUBLE_EQ(p0, 1.0);
  EXPECT_DOUBLE_EQ(r0, 0.0);
}

TEST(RandomBaseline, RejectsDegenerateArguments) {
  EXPECT_THROW(random_baseline(-1, 10, 0.5), ValidationError);
  EXPECT_THROW(random_baseline(10, -1, 0.5), ValidationError);
  EXPECT_THROW(random_baseline(0, 0, 0.5), ValidationError);
  EXPECT_THROW(random_baseline(10, 10, -0.1), ValidationError);
  EXPECT_THROW(random_baseline(10, 10, 1.1), ValidationError);
}

// ---------------------------------------------------------------------------
// Cosine similarity and caption diversity
// ---------------------------------------------------------------------------

TEST(Cosine, ExactValuesAndGuards) {
  EXPECT_DOUBLE_EQ(cosine({1, 0, 0}, {1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine({1, 2}, {-1, -2}), -1.0);
  EXPECT_DOUBLE_EQ(cosine({3, 4}, {6, 8}), 1.0);
  // Element-wise equal vectors take the exact fast path even when a naive
  // dot/norm evaluation would wobble in the last ulp.
  std::vector<double> wobble = {0.1, 0.2, 0.3, 1e-7, 9e6};
  EXPECT_EQ(cosine(wobble, wobble), 1.0);

  EXPECT_THROW(cosine({1, 2}, {1, 2, 3}), ValidationError);
  EXPECT_THROW(cosine({}, {}), ValidationError);
  EXPECT_THROW(cosine({0, 0}, {1, 2}), ValidationError);
  EXPECT_THROW(cosine({1, 2}, {0, 0}), ValidationError);
  EXPECT_THROW(cosine({0, 0}, {0, 0}), ValidationError);
}

TEST(Cosine, StaysClampedOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int iter = 0; iter < 1000; ++iter) {
    size_t dims = 1 + rng() % 8;
    std::vector<double> u(dims), v(dims);
    for (size_t d = 0; d < dims; ++d) {
      u[d] = val(rng);
      v[d] = val(rng);
    }
    u[rng() % dims] += 1.5;  // keep norms safely nonzero
    v[rng() % dims] += 1.5;
    double c = cosine(u, v);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(CaptionDiversity, IdenticalCaptionsScoreExactlyZero) {
  std::vector<std::vector<double>> vs(5, std::vector<double>{0.3, -0.7, 2.0});
  EXPECT_EQ(caption_diversity(vs), 0.0);
}

TEST(CaptionDiversity, OrthogonalCaptionsScoreExactlyOne) {
  std::vector<std::vector<double>> vs;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> e(4, 0.0);
    e[size_t(i)] = 2.5;  // scale must not matter
    vs.push_back(e);
  }
  EXPECT_DOUBLE_EQ(caption_diversity(vs), 1.0);
}

TEST(CaptionDiversity, OppositePairTopsOutAtTwo) {
  EXPECT_DOUBLE_EQ(caption_diversity({{1, 1}, {-1, -1}}), 2.0);
  EXPECT_THROW(caption_diversity({{1, 1}}), ValidationError);
  EXPECT_THROW(caption_diversity({}), ValidationError);
}

TEST(CaptionDiversity, MatchesBruteForceWithinTightTolerance) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int iter = 0; iter < 100; ++iter) {
    size_t k = 2 + rng() % 11;
    size_t dims = 2 + rng() % 7;
    std::vector<std::vector<double>> vs(k, std::vector<double>(dims));
    for (auto& v : vs) {
      for (auto& x : v) x = val(rng);
      v[rng() % dims] += 2.0;  // keep every norm nonzero
    }
    double got = caption_diversity(vs);
    EXPECT_NEAR(got, testutil::naive_diversity(vs), 1e-9) << "iteration " << iter;
    EXPECT_GE(got, 0.0 - 1e-12);
    EXPECT_LE(got, 2.0 + 1e-12);
  }
}

TEST(CaptionDiversity, InvariantUnderPermutationAndPositiveRescaling) {
  std::mt19937_64 rng(4321);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int iter = 0; iter < 100; ++iter) {
    size_t k = 2 + rng() % 11;
    size_t dims = 2 + rng() % 7;
    std::vector<std::vector<double>> vs(k, std::vector<double>(dims));
    for (auto& v : vs) {
      for (auto& x : v) x = val(rng);
      v[rng() % dims] += 2.0;
    }
    double base = caption_diversity(vs);

    std::vector<std::vector<double>> shuffled = vs;
    deterministic_shuffle(shuffled, rng);
    EXPECT_NEAR(caption_diversity(shuffled), base, 1e-9);

    std::vector<std::vector<double>> rescaled = vs;
    for (auto& v : rescaled) {
      double s = scale(rng);
      for (auto& x : v) x *= s;
    }
    EXPECT_NEAR(caption_diversity(rescaled), base, 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Diversity / outcome joins
// ---------------------------------------------------------------------------

namespace {

DiversityScore score_of(const std::string& id, double score) {
  DiversityScore s;
  s.sample_id = id;
  s.k = 20;
  s.score = score;
  s.embedding_model_id = "embedder";
  return s;
}

ScoredRecord outcome_of(const std::string& id, Outcome o, int severity = 0) {
  ScoredRecord r;
  r.sample_id = id;
  r.outcome = o;
  if (o == Outcome::kLabel) {
    r.pred_class = "cat";
    r.truth_class = "cat";
  } else {
    r.truth_class = "cat";
  }
  r.severity = severity;
  return r;
}

}  // namespace

TEST(DiversitySplit, JoinsScoresWithOutcomes) {
  std::vector<DiversityScore> scores = {score_of("a", 0.8), score_of("b", 0.2),
                                        score_of("c", 0.5), score_of("x", 0.9)};
  std::vector<ScoredRecord> records = {
      outcome_of("a", Outcome::kRejected), outcome_of("b", Outcome::kLabel),
      outcome_of("c", Outcome::kMalformed), outcome_of("d", Outcome::kLabel)};

  DiversitySplit split = diversity_split(scores, records);
  EXPECT_EQ(split.n_rejected, 1);
  EXPECT_EQ(split.n_classified, 1);
  EXPECT_EQ(split.n_malformed, 1);
  EXPECT_EQ(split.n_score_only, 1);   // "x" has no record
  EXPECT_EQ(split.n_record_only, 1);  // "d" has no score
  ASSERT_TRUE(split.rejected_mean && split.classified_mean);
  EXPECT_DOUBLE_EQ(*split.rejected_mean, 0.8);
  EXPECT_DOUBLE_EQ(*split.classified_mean, 0.2);

  DiversitySplit empty_side = diversity_split({}, records);
  EXPECT_FALSE(empty_side.rejected_mean.has_value());
  EXPECT_EQ(empty_side.n_record_only, 4);
}

TEST(DiversitySplit, PerGroupSplitKeepsIdsWithinTheirGroup) {
  std::vector<DiversityScore> scores = {score_of("a", 0.1), score_of("b", 0.9),
                                        score_of("c", 0.4)};
  std::vector<ScoredRecord> records = {outcome_of("a", Outcome::kLabel, 1),
                                       outcome_of("b", Outcome::kRejected, 3),
                                       outcome_of("c", Outcome::kRejected, 3)};
  auto by_sev = diversity_split_by(scores, records, GroupKey::kSeverity);
  ASSERT_EQ(by_sev.size(), 2u);
  EXPECT_EQ(by_sev[0].first, 1);
  ASSERT_TRUE(by_sev[0].second.classified_mean.has_value());
  EXPECT_DOUBLE_EQ(*by_sev[0].second.classified_mean, 0.1);
  EXPECT_EQ(by_sev[1].first, 3);
  ASSERT_TRUE(by_sev[1].second.rejected_mean.has_value());
  EXPECT_DOUBLE_EQ(*by_sev[1].second.rejected_mean, (0.9 + 0.4) / 2.0);

  std::vector<ScoredRecord> no_bin = {outcome_of("a", Outcome::kLabel)};
  EXPECT_THROW(diversity_split_by(scores, no_bin, GroupKey::kAmbiguityBin),
               ValidationError);
}
