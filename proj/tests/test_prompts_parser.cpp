#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmuq/parser.hpp"
#include "vlmuq/prompts.hpp"
#include "vlmuq/tagline.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace vlmuq;
using testutil::TempDir;

namespace {

const std::vector<std::pair<CatalogId, Strategy>>& classification_variants() {
  static const auto variants = [] {
    std::vector<std::pair<CatalogId, Strategy>> v;
    for (CatalogId c : kAllCatalogs) {
      if (is_caption_catalog(c)) continue;
      for (Strategy s : kAllStrategies) v.emplace_back(c, s);
    }
    return v;
  }();
  return variants;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompt catalog
// ---------------------------------------------------------------------------

namespace {

// Reference marker walk: splits a template body into (kept, clause) pieces by
// scanning for the documented [[...]] spans directly.
void reference_split(const std::string& body, std::string& with, std::string& without,
                     std::string& clause) {
  size_t pos = 0;
  while (pos < body.size()) {
    size_t open = body.find("[[", pos);
    if (open == std::string::npos) {
      with += body.substr(pos);
      without += body.substr(pos);
      break;
    }
    size_t close = body.find("]]", open + 2);
    ASSERT_NE(close, std::string::npos) << "unbalanced marker in builtin body";
    with += body.substr(pos, open - pos);
    without += body.substr(pos, open - pos);
    std::string span = body.substr(open + 2, close - open - 2);
    with += span;
    clause += span;
    pos = close + 2;
  }
}

}  // namespace

TEST(PromptCatalog, RejectionClauseTogglesCleanly) {
  PromptCatalog cat;
  for (const auto& [c, s] : classification_variants()) {
    const PromptTemplate& tmpl = cat.get(c, s);
    SCOPED_TRACE(std::string(catalog_id_name(c)) + "/" + strategy_name(s));

    std::string want_with, want_without, want_clause;
    reference_split(tmpl.body, want_with, want_without, want_clause);
    ASSERT_FALSE(want_clause.empty());
    EXPECT_EQ(tmpl.render_body(true), want_with);
    EXPECT_EQ(tmpl.render_body(false), want_without);
    EXPECT_EQ(tmpl.rejection_clause(), want_clause);

    // Neither rendering leaks marker syntax.
    for (const std::string& body : {want_with, want_without}) {
      EXPECT_EQ(body.find("[["), std::string::npos);
      EXPECT_EQ(body.find("]]"), std::string::npos);
    }
  }
}

TEST(PromptCatalog, RejectionMarkersPresentIffEnabled) {
  PromptCatalog cat;
  for (const auto& [c, s] : classification_variants()) {
    std::string with = cat.get(c, s).render_body(true);
    std::string without = cat.get(c, s).render_body(false);
    SCOPED_TRACE(std::string(catalog_id_name(c)) + "/" + strategy_name(s));

    bool any_with = false;
    for (const std::string& m : rejection_clause_markers()) {
      if (with.find(m) != std::string::npos) any_with = true;
      EXPECT_EQ(without.find(m), std::string::npos) << m;
    }
    EXPECT_TRUE(any_with);
    // The opt-out token only shows up when the clause asks for it.
    EXPECT_NE(with.find("unknown"), std::string::npos);
    EXPECT_EQ(without.find("unknown"), std::string::npos);
  }
}

TEST(PromptCatalog, BodiesSpellOutTheirLabelSpace) {
  PromptCatalog cat;
  for (const auto& [c, s] : classification_variants()) {
    std::string body = cat.get(c, s).render_body(false);
    for (const std::string& label : PromptCatalog::label_space_for(c))
      EXPECT_NE(body.find(label), std::string::npos)
          << catalog_id_name(c) << "/" << strategy_name(s) << " misses " << label;
  }
}

TEST(PromptCatalog, LabelSpacesAndAnswerKeys) {
  EXPECT_EQ(PromptCatalog::label_space_for(CatalogId::kCifarAnomaly).size(), 10u);
  EXPECT_EQ(PromptCatalog::label_space_for(CatalogId::kEcgAnomaly).size(), 2u);
  EXPECT_EQ(PromptCatalog::label_space_for(CatalogId::kImagenetcClassify).size(), 10u);
  EXPECT_EQ(PromptCatalog::label_space_for(CatalogId::kGalaxyClassify).size(), 4u);
  EXPECT_TRUE(PromptCatalog::label_space_for(CatalogId::kCaptionImagenet).empty());
  EXPECT_TRUE(PromptCatalog::label_space_for(CatalogId::kCaptionGalaxy).empty());

  PromptCatalog cat;
  EXPECT_EQ(cat.get(CatalogId::kCifarAnomaly, Strategy::kSimple).answer_key, "Answer:");
  EXPECT_EQ(cat.get(CatalogId::kEcgAnomaly, Strategy::kDirect).answer_key, "Answer:");
  EXPECT_EQ(cat.get(CatalogId::kImagenetcClassify, Strategy::kSimple).answer_key,
            "Label:");
  EXPECT_EQ(cat.get(CatalogId::kGalaxyClassify, Strategy::kCaptionAnswer).answer_key,
            "Answer:");
  EXPECT_TRUE(cat.get(CatalogId::kCaptionImagenet, Strategy::kSimple).answer_key.empty());
}

TEST(PromptCatalog, RenderPackagesSingleUserTurnWithImage) {
  PromptCatalog cat;
  RenderedPrompt p =
      cat.render(CatalogId::kCifarAnomaly, Strategy::kDirect, true, "PNGBYTES");
  ASSERT_EQ(p.messages.size(), 1u);
  EXPECT_EQ(p.messages[0].role, "user");
  EXPECT_EQ(p.messages[0].image_png, "PNGBYTES");
  EXPECT_EQ(p.image_count(), 1u);
  EXPECT_EQ(p.answer_key, "Answer:");
  EXPECT_EQ(p.label_space, cifar10_classes());
  EXPECT_EQ(p.rejection_tokens, std::vector<std::string>{"unknown"});

  RenderedPrompt cap =
      cat.render(CatalogId::kCaptionGalaxy, Strategy::kSimple, false, "IMG");
  EXPECT_TRUE(cap.label_space.empty());
  EXPECT_TRUE(cap.rejection_tokens.empty());
  EXPECT_TRUE(cap.answer_key.empty());
}

TEST(PromptCatalog, CaptionCatalogsTakeNoVariants) {
  PromptCatalog cat;
  EXPECT_THROW(cat.render(CatalogId::kCaptionImagenet, Strategy::kSimple, true, ""),
               ValidationError);
  EXPECT_THROW(cat.render(CatalogId::kCaptionImagenet, Strategy::kDirect, false, ""),
               ValidationError);
  EXPECT_THROW(cat.render(CatalogId::kCaptionGalaxy, Strategy::kCaptionAnswer, false, ""),
               ValidationError);
  EXPECT_NO_THROW(cat.render(CatalogId::kCaptionGalaxy, Strategy::kSimple, false, ""));
}

TEST(PromptCatalog, FingerprintsSeparateEveryVariant) {
  PromptCatalog a, b;
  EXPECT_EQ(a.fingerprint(), b.fingerprint());  // deterministic across instances

  std::set<std::string> prints;
  for (const auto& [c, s] : classification_variants()) {
    prints.insert(a.variant_fingerprint(c, s, false));
    prints.insert(a.variant_fingerprint(c, s, true));
  }
  prints.insert(a.variant_fingerprint(CatalogId::kCaptionImagenet, Strategy::kSimple, false));
  prints.insert(a.variant_fingerprint(CatalogId::kCaptionGalaxy, Strategy::kSimple, false));
  EXPECT_EQ(prints.size(), classification_variants().size() * 2 + 2);
}

TEST(PromptCatalog, OverridesReplaceTemplatesAndMoveFingerprint) {
  TempDir td;
  std::ofstream(td.path / "cifar_direct.prompt")
      << "---\n"
         "catalog_id: cifar_anomaly\n"
         "strategy: direct\n"
         "answer_key: \"Answer:\"\n"
         "---\n"
         "Name the cifar class[[, or say \"unknown\" if it is none of them]].\n"
         "Answer: <answer>";

  PromptCatalog stock, patched;
  patched.load_overrides(td.path);
  const PromptTemplate& tmpl = patched.get(CatalogId::kCifarAnomaly, Strategy::kDirect);
  EXPECT_EQ(tmpl.render_body(false),
            "Name the cifar class.\nAnswer: <answer>");
  EXPECT_EQ(tmpl.rejection_clause(), ", or say \"unknown\" if it is none of them");
  EXPECT_NE(stock.fingerprint(), patched.fingerprint());
  // Untouched templates keep their built-in bodies.
  EXPECT_EQ(stock.get(CatalogId::kEcgAnomaly, Strategy::kSimple).body,
            patched.get(CatalogId::kEcgAnomaly, Strategy::kSimple).body);
}

TEST(PromptCatalog, OverrideStrategyDefaultsToSimple) {
  TempDir td;
  std::ofstream(td.path / "caption.prompt") << "---\n"
                                               "catalog_id: caption_imagenet\n"
                                               "---\n"
                                               "Describe the image in one sentence.";
  PromptCatalog cat;
  cat.load_overrides(td.path);
  EXPECT_EQ(cat.get(CatalogId::kCaptionImagenet, Strategy::kSimple).body,
            "Describe the image in one sentence.");
}

TEST(PromptCatalog, OverrideValidationFailures) {
  PromptCatalog cat;
  TempDir td;
  auto write_and_expect_throw = [&](const std::string& text) {
    std::ofstream(td.path / "bad.prompt") << text;
    EXPECT_THROW(cat.load_overrides(td.path), ValidationError) << text;
    fs::remove(td.path / "bad.prompt");
  };

  write_and_expect_throw("no front matter at all");
  write_and_expect_throw("---\ncatalog_id: cifar_anomaly\nnever closed");
  write_and_expect_throw("---\nline without separator\n---\nbody");
  write_and_expect_throw("---\nstrategy: direct\n---\nbody");  // catalog_id missing
  write_and_expect_throw("---\ncatalog_id: made_up\n---\nbody");
  write_and_expect_throw("---\ncatalog_id: cifar_anomaly\nstrategy: sideways\n---\nbody");
  // Caption catalogs cannot gain strategy variants via overrides.
  write_and_expect_throw("---\ncatalog_id: caption_imagenet\nstrategy: direct\n---\nbody");
  // Classification overrides must keep an answer key.
  write_and_expect_throw("---\ncatalog_id: cifar_anomaly\nstrategy: direct\n---\nbody");

  EXPECT_THROW(cat.load_overrides(td.path / "missing_dir"), ValidationError);
}

TEST(PromptCatalog, UnbalancedMarkerIsReported) {
  PromptTemplate tmpl;
  tmpl.body = "keep [[clause without close";
  EXPECT_THROW(tmpl.render_body(true), ValidationError);
  EXPECT_THROW(tmpl.rejection_clause(), ValidationError);
}

// ---------------------------------------------------------------------------
// Answer parser: fixture corpus
// ---------------------------------------------------------------------------

TEST(ParserFixtures, EveryRecordedCasePasses) {
  fs::path path = fs::path(VLMUQ_FIXTURE_DIR) / "parser_cases.jsonl";
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing fixture corpus: " << path;

  int n_cases = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    ++n_cases;
    SCOPED_TRACE(j.at("name").get<std::string>());

    std::vector<std::string> space =
        j.contains("label_space")
            ? j["label_space"].get<std::vector<std::string>>()
            : cifar10_classes();
    std::vector<std::string> rejection =
        j.contains("rejection_tokens")
            ? j["rejection_tokens"].get<std::vector<std::string>>()
            : std::vector<std::string>{"unknown"};

    ParsedAnswer got = parse_answer(j.at("raw").get<std::string>(),
                                    j.at("answer_key").get<std::string>(), space,
                                    rejection);
    EXPECT_EQ(outcome_name(got.outcome), j.at("expect").get<std::string>());
    if (j.at("expect") == "label")
      EXPECT_EQ(got.class_name, j.at("class").get<std::string>());
    else
      EXPECT_TRUE(got.class_name.empty());
    if (got.outcome == Outcome::kMalformed)
      EXPECT_EQ(got.raw_text, j.at("raw").get<std::string>());
  }
  EXPECT_GE(n_cases, 60) << "fixture corpus shrank";
}

// ---------------------------------------------------------------------------
// Answer parser: properties
// ---------------------------------------------------------------------------

TEST(Parser, NormalizeIsIdempotentAndOrderly) {
  EXPECT_EQ(normalize_answer("  The QUICK, brown fox!!  "),
            "the quick brown fox");
  EXPECT_EQ(normalize_answer("snake_case stays"), "snake_case stays");
  EXPECT_EQ(normalize_answer("\t\n"), "");
  for (const std::string& s :
       {std::string("A & B"), std::string("**bold**"), std::string("a  b\tc\nd"),
        std::string("\xF0\x9F\x90\xB1 cat")}) {
    std::string once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << s;
  }
}

TEST(Parser, FuzzNeverThrowsAndLabelsStayInSpace) {
  const std::vector<std::string>& space = cifar10_classes();
  const std::vector<std::string> rejection = {"unknown"};
  const std::vector<std::string> pool = {
      "Answer:", "Label:",   "Reasoning:", "unknown", "cat",   "dog",
      "ship",    "truck",    "deer",       "**",      "``",    "###",
      "<think>", "</think>", "{\"a\":1}",  "\r",      "\xF0\x9F\x90\xB1",
      "answer",  "is",       "the",        "maybe",   "42",    "_",
      "normal",  "abnormal", "smooth_round", "[",     "]",     "\"",
  };
  std::mt19937_64 rng(777);
  for (int iter = 0; iter < 10000; ++iter) {
    std::string text;
    int n_tokens = int(rng() % 12);
    for (int t = 0; t < n_tokens; ++t) {
      text += pool[rng() % pool.size()];
      text += (rng() % 4 == 0) ? '\n' : ' ';
    }
    ParsedAnswer got = parse_answer(text, "Answer:", space, rejection);
    if (got.outcome == Outcome::kLabel) {
      EXPECT_NE(std::find(space.begin(), space.end(), got.class_name), space.end())
          << "label escaped the label space on: " << text;
    } else {
      EXPECT_TRUE(got.class_name.empty());
    }
    std::string once = normalize_answer(text);
    EXPECT_EQ(normalize_answer(once), once);
    parse_caption(text);  // must never throw either
  }
}

// ---------------------------------------------------------------------------
// Caption parser
// ---------------------------------------------------------------------------

TEST(Parser, CaptionStripsPrefixAndQuotes) {
  EXPECT_EQ(parse_caption("Caption: a cat on a mat."), "a cat on a mat.");
  EXPECT_EQ(parse_caption("description: Two ships at sea"), "Two ships at sea");
  EXPECT_EQ(parse_caption("**Caption:** \"a blurry galaxy\""), "a blurry galaxy");
  EXPECT_EQ(parse_caption("'single-quoted scene'"), "single-quoted scene");
  EXPECT_EQ(parse_caption("  plain text stays  "), "plain text stays");
  // Case is preserved apart from the stripped dressing.
  EXPECT_EQ(parse_caption("Caption: An ECG trace"), "An ECG trace");
}

TEST(Parser, CaptionRejectsEmptyOutputs) {
  EXPECT_EQ(parse_caption(""), std::nullopt);
  EXPECT_EQ(parse_caption("   "), std::nullopt);
  EXPECT_EQ(parse_caption("Caption:"), std::nullopt);
  EXPECT_EQ(parse_caption("Caption: \"\""), std::nullopt);
}
