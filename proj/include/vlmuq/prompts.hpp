#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vlmuq/class_map.hpp"
#include "vlmuq/corpus.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

enum class CatalogId {
  kCifarAnomaly,
  kEcgAnomaly,
  kImagenetcClassify,
  kGalaxyClassify,
  kCaptionImagenet,
  kCaptionGalaxy,
};

inline constexpr std::array<CatalogId, 6> kAllCatalogs = {
    CatalogId::kCifarAnomaly,      CatalogId::kEcgAnomaly,
    CatalogId::kImagenetcClassify, CatalogId::kGalaxyClassify,
    CatalogId::kCaptionImagenet,   CatalogId::kCaptionGalaxy,
};

inline const char* catalog_id_name(CatalogId c) {
  switch (c) {
    case CatalogId::kCifarAnomaly: return "cifar_anomaly";
    case CatalogId::kEcgAnomaly: return "ecg_anomaly";
    case CatalogId::kImagenetcClassify: return "imagenetc_classify";
    case CatalogId::kGalaxyClassify: return "galaxy_classify";
    case CatalogId::kCaptionImagenet: return "caption_imagenet";
    case CatalogId::kCaptionGalaxy: return "caption_galaxy";
  }
  return "?";
}

inline CatalogId catalog_id_from_name(const std::string& name) {
  for (CatalogId c : kAllCatalogs)
    if (name == catalog_id_name(c)) return c;
  throw ValidationError("unknown prompt catalog: " + name);
}

inline bool is_caption_catalog(CatalogId c) {
  return c == CatalogId::kCaptionImagenet || c == CatalogId::kCaptionGalaxy;
}

enum class Strategy { kSimple, kDirect, kCaptionAnswer };

inline constexpr std::array<Strategy, 3> kAllStrategies = {
    Strategy::kSimple, Strategy::kDirect, Strategy::kCaptionAnswer};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kSimple: return "simple";
    case Strategy::kDirect: return "direct";
    case Strategy::kCaptionAnswer: return "caption_answer";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : kAllStrategies)
    if (name == strategy_name(s)) return s;
  throw ValidationError("unknown prompt strategy: " + name);
}

// One template body, stored with the rejection clause wrapped in [[...]]
// markers so toggling the clause provably changes nothing else.
struct PromptTemplate {
  CatalogId catalog_id = CatalogId::kCifarAnomaly;
  Strategy strategy = Strategy::kSimple;
  std::string answer_key;  // "Answer:" / "Label:" / empty for caption catalogs
  std::string body;        // with [[...]] rejection markers

  // Body with markers resolved: enabled keeps the clause text, disabled drops it.
  std::string render_body(bool rejection_enabled) const {
    std::string out;
    size_t pos = 0;
    while (true) {
      size_t open = body.find("[[", pos);
      if (open == std::string::npos) {
        out += body.substr(pos);
        break;
      }
      size_t close = body.find("]]", open + 2);
      if (close == std::string::npos)
        throw ValidationError("unbalanced rejection marker in prompt template");
      out += body.substr(pos, open - pos);
      if (rejection_enabled) out += body.substr(open + 2, close - open - 2);
      pos = close + 2;
    }
    return out;
  }

  // The marked clause text (concatenated if there are several spans).
  std::string rejection_clause() const {
    std::string clause;
    size_t pos = 0;
    while (true) {
      size_t open = body.find("[[", pos);
      if (open == std::string::npos) break;
      size_t close = body.find("]]", open + 2);
      if (close == std::string::npos)
        throw ValidationError("unbalanced rejection marker in prompt template");
      clause += body.substr(open + 2, close - open - 2);
      pos = close + 2;
    }
    return clause;
  }
};

struct ChatMessage {
  std::string role;
  std::string text;
  std::string image_png;  // raw PNG bytes; empty if the message has no image
};

struct RenderedPrompt {
  std::vector<ChatMessage> messages;  // single user turn: text + image
  std::vector<std::string> label_space;
  std::vector<std::string> rejection_tokens;
  std::string answer_key;

  size_t image_count() const {
    size_t n = 0;
    for (const auto& m : messages)
      if (!m.image_png.empty()) ++n;
    return n;
  }
};

namespace detail {

inline std::map<std::pair<CatalogId, Strategy>, PromptTemplate> builtin_templates() {
  std::map<std::pair<CatalogId, Strategy>, PromptTemplate> t;
  auto add = [&](CatalogId c, Strategy s, std::string key, std::string body) {
    t[{c, s}] = PromptTemplate{c, s, std::move(key), std::move(body)};
  };

  const std::string cifar_head =
      "You are given an image, check if the image is from one of the following 10 classes:\n"
      "airplane, automobile, bird, cat, deer, dog, frog, horse, ship, and truck, "
      "if so, classify the image into one of 10 classes"
      "[[, if not, label them as \"unknown\"]].\n\n";
  add(CatalogId::kCifarAnomaly, Strategy::kSimple, "Answer:",
      cifar_head +
          "Think step by step, and give an answer in the following format:\n"
          "Reasoning: <your_reasoning>\n"
          "Answer: <your answer>");
  add(CatalogId::kCifarAnomaly, Strategy::kDirect, "Answer:",
      cifar_head +
          "Only output the classification answer, without any reasoning steps or image "
          "description, in the following format:\n"
          "Answer: <your answer>");
  add(CatalogId::kCifarAnomaly, Strategy::kCaptionAnswer, "Answer:",
      cifar_head +
          "First caption the image, then answer the question using both the caption and "
          "the image, in the following format:\n"
          "Caption: <your caption>\n"
          "Answer: <your answer>");

  const std::string ecg_head =
      "Your task is to classify the given ECG signal into the normal case and the "
      "abnormal cases.\n"
      "[[\nNote that if the signal does NOT look like ECG signal or cannot be classified "
      "into\neither of the categories, return \"unknown\" as the answer.\n]]\n";
  add(CatalogId::kEcgAnomaly, Strategy::kSimple, "Answer:",
      ecg_head +
          "Give an answer and step-by-step reasoning in the format:\n"
          "Reasoning: <your_reasoning>\n"
          "Answer: normal/abnormal[[/unknown]]");
  add(CatalogId::kEcgAnomaly, Strategy::kDirect, "Answer:",
      ecg_head +
          "Only output the answer, without any reasoning steps, in the format:\n"
          "Answer: normal/abnormal[[/unknown]]");
  add(CatalogId::kEcgAnomaly, Strategy::kCaptionAnswer, "Answer:",
      ecg_head +
          "First caption the image, then answer the question using both the caption and "
          "the image, in the format:\n"
          "Caption: <your caption>\n"
          "Answer: normal/abnormal[[/unknown]]");

  const std::string inc_head =
      "You are given an image, the image belongs to one of the following 10 classes: \n"
      "airplane, automobile, bird, cat, deer, dog, frog, horse, ship, and truck.\n\n";
  const std::string inc_clause =
      "[[\n\nNotice that if you find an image very ambiguous and cannot confidently "
      "classify it, return \"unknown\" as the label.]]";
  add(CatalogId::kImagenetcClassify, Strategy::kSimple, "Label:",
      inc_head +
          "Please assign each an image a label from the 10 classes, think step by step, "
          "and give an answer in the following format:\n"
          "Reasoning: your_reasoning\n"
          "Label: class_name" +
          inc_clause);
  add(CatalogId::kImagenetcClassify, Strategy::kDirect, "Label:",
      inc_head +
          "Please assign each an image a label from the 10 classes. Only output the "
          "label, without any reasoning steps or image description, in the following "
          "format:\n"
          "Label: class_name" +
          inc_clause);
  add(CatalogId::kImagenetcClassify, Strategy::kCaptionAnswer, "Label:",
      inc_head +
          "Please assign each an image a label from the 10 classes. First caption the "
          "image, then answer the question using both the caption and the image, in the "
          "following format:\n"
          "Caption: <your caption>\n"
          "Label: class_name" +
          inc_clause);

  const std::string galaxy_head =
      "You are an expert astronomer specializing in galaxy morphology. You will be shown "
      "images of galaxies and need to classify them into one of the following categories "
      "by analyzing their visual characteristics:\n\n"
      "1. smooth_round: Galaxies that appear completely or nearly circular, with a "
      "smooth decrease in brightness from center to edge.\n"
      "2. smooth_cigar: Galaxies that appear elongated and smooth, with an elliptical "
      "shape resembling a cigar, showing a gradual decrease in brightness from center to "
      "edge.\n"
      "3. edge_on_disk: Galaxies viewed from the side, appearing as a thin line or disk "
      "with a bright central bulge, similar to viewing a dinner plate from its edge.\n"
      "4. unbarred_spiral: Spiral galaxies without a central bar structure, showing "
      "distinct spiral arms emanating directly from the galactic center.\n\n";
  const std::string galaxy_clause =
      "[[Notice that if you find an image very ambiguous and cannot confidently classify "
      "it,\nreturn \"unknown\" as the label.\n]]";
  add(CatalogId::kGalaxyClassify, Strategy::kSimple, "Answer:",
      galaxy_head +
          "Classify the galaxy into exactly one of the four categories listed above "
          "with step by step reasoning.\n" +
          galaxy_clause +
          "\nYour response should be structured as:\n"
          "Reasoning: [Brief explanation of the key visual features that support this "
          "classification]\n"
          "Answer: [category_name][[ or unknown]]");
  add(CatalogId::kGalaxyClassify, Strategy::kDirect, "Answer:",
      galaxy_head +
          "Classify the galaxy into exactly one of the four categories listed above. "
          "Only output the classification answer, without any reasoning steps or image "
          "description.\n" +
          galaxy_clause +
          "\nYour response should be structured as:\n"
          "Answer: [category_name][[ or unknown]]");
  add(CatalogId::kGalaxyClassify, Strategy::kCaptionAnswer, "Answer:",
      galaxy_head +
          "Classify the galaxy into exactly one of the four categories listed above. "
          "First caption the image, then answer the question using both the caption and "
          "the image.\n" +
          galaxy_clause +
          "\nYour response should be structured as:\n"
          "Caption: [your caption]\n"
          "Answer: [category_name][[ or unknown]]");

  add(CatalogId::kCaptionImagenet, Strategy::kSimple, "",
      "You are given an image, please generate a short description of the image.");
  add(CatalogId::kCaptionGalaxy, Strategy::kSimple, "",
      "You are an expert astronomer specializing in galaxy morphology. Please generate "
      "a concise description of the image that describes its key visual "
      "characteristics.");
  return t;
}

// Minimal front-matter parser: a leading "---" block of "key: value" lines.
// Returns (keys, body-after-block).
inline std::pair<std::map<std::string, std::string>, std::string> parse_front_matter(
    const std::string& text, const std::string& origin) {
  std::vector<std::string> lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "---")
    throw ValidationError(origin + ": template file must start with a --- block");
  std::map<std::string, std::string> keys;
  size_t i = 1;
  for (; i < lines.size(); ++i) {
    if (trim(lines[i]) == "---") break;
    std::string line = trim(lines[i]);
    if (line.empty()) continue;
    size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw ValidationError(origin + ": front-matter line without ':': " + line);
    std::string value = trim(line.substr(colon + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    keys[trim(line.substr(0, colon))] = value;
  }
  if (i == lines.size())
    throw ValidationError(origin + ": unterminated front-matter block");
  std::string body;
  for (size_t j = i + 1; j < lines.size(); ++j) {
    if (j > i + 1) body += '\n';
    body += lines[j];
  }
  while (!body.empty() && body.back() == '\n') body.pop_back();
  return {keys, body};
}

}  // namespace detail

// All prompt templates, with their label spaces and fingerprints. Immutable
// after construction/override loading; safe to share across threads.
class PromptCatalog {
 public:
  PromptCatalog() : templates_(detail::builtin_templates()) {}

  // Replaces built-in templates from *.prompt files (front-matter: catalog_id,
  // strategy, answer_key; body below, with optional [[...]] markers).
  void load_overrides(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
      throw ValidationError("prompt override dir not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.is_regular_file() && f.path().extension() == ".prompt")
        files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto [keys, body] = detail::parse_front_matter(read_file(f), f.string());
      auto need = [&](const std::string& k) {
        auto it = keys.find(k);
        if (it == keys.end())
          throw ValidationError(f.string() + ": missing front-matter key '" + k + "'");
        return it->second;
      };
      PromptTemplate tmpl;
      tmpl.catalog_id = catalog_id_from_name(need("catalog_id"));
      tmpl.strategy = strategy_from_name(keys.count("strategy") ? keys["strategy"] : "simple");
      tmpl.answer_key = keys.count("answer_key") ? keys["answer_key"] : "";
      tmpl.body = body;
      if (is_caption_catalog(tmpl.catalog_id) && tmpl.strategy != Strategy::kSimple)
        throw ValidationError(f.string() + ": caption catalogs take no strategy variants");
      if (!is_caption_catalog(tmpl.catalog_id) && tmpl.answer_key.empty())
        throw ValidationError(f.string() + ": classification template needs answer_key");
      templates_[{tmpl.catalog_id, tmpl.strategy}] = std::move(tmpl);
    }
  }

  const PromptTemplate& get(CatalogId catalog, Strategy strategy) const {
    auto it = templates_.find({catalog, strategy});
    if (it == templates_.end())
      throw ValidationError(std::string("no template for catalog ") +
                            catalog_id_name(catalog) + ", strategy " +
                            strategy_name(strategy));
    return it->second;
  }

  // Class names a model may answer with, as spelled in the prompt body.
  static const std::vector<std::string>& label_space_for(CatalogId catalog) {
    static const std::vector<std::string> ecg = {"normal", "abnormal"};
    static const std::vector<std::string> none = {};
    switch (catalog) {
      case CatalogId::kCifarAnomaly:
      case CatalogId::kImagenetcClassify: return cifar10_classes();
      case CatalogId::kEcgAnomaly: return ecg;
      case CatalogId::kGalaxyClassify: return galaxy_classes();
      case CatalogId::kCaptionImagenet:
      case CatalogId::kCaptionGalaxy: return none;
    }
    return none;
  }

  RenderedPrompt render(CatalogId catalog, Strategy strategy, bool rejection_enabled,
                        std::string image_png) const {
    if (is_caption_catalog(catalog) &&
        (strategy != Strategy::kSimple || rejection_enabled))
      throw ValidationError(std::string("caption catalog ") + catalog_id_name(catalog) +
                            " takes no strategy/rejection variants");
    const PromptTemplate& tmpl = get(catalog, strategy);
    RenderedPrompt p;
    p.messages.push_back({"user", tmpl.render_body(rejection_enabled), std::move(image_png)});
    p.label_space = label_space_for(catalog);
    if (!is_caption_catalog(catalog)) p.rejection_tokens = {"unknown"};
    p.answer_key = tmpl.answer_key;
    return p;
  }

  // Stable digest over every template text; recorded with each query so runs
  // are attributable to the exact prompts used.
  std::string fingerprint() const {
    std::string acc;
    for (const auto& [key, tmpl] : templates_) {
      acc += catalog_id_name(key.first);
      acc += '\x1f';
      acc += strategy_name(key.second);
      acc += '\x1f';
      acc += tmpl.answer_key;
      acc += '\x1f';
      acc += tmpl.body;
      acc += '\x1e';
    }
    return sha256_hex(acc);
  }

  // Digest of one (catalog, strategy, rejection) variant: distinct prompt
  // variants must never share cache entries.
  std::string variant_fingerprint(CatalogId catalog, Strategy strategy,
                                  bool rejection_enabled) const {
    return sha256_hex(fingerprint() + '\x1f' + catalog_id_name(catalog) + '\x1f' +
                      strategy_name(strategy) + '\x1f' +
                      (rejection_enabled ? "reject" : "standard"));
  }

  const std::map<std::pair<CatalogId, Strategy>, PromptTemplate>& all() const {
    return templates_;
  }

 private:
  std::map<std::pair<CatalogId, Strategy>, PromptTemplate> templates_;
};

}  // namespace vlmuq
