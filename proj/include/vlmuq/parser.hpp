#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "vlmuq/util.hpp"

namespace vlmuq {

enum class Outcome { kLabel, kRejected, kMalformed };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kLabel: return "label";
    case Outcome::kRejected: return "rejected";
    case Outcome::kMalformed: return "malformed";
  }
  return "?";
}

inline Outcome outcome_from_name(const std::string& name) {
  if (name == "label") return Outcome::kLabel;
  if (name == "rejected") return Outcome::kRejected;
  if (name == "malformed") return Outcome::kMalformed;
  throw ValidationError("unknown outcome: " + name);
}

struct ParsedAnswer {
  Outcome outcome = Outcome::kMalformed;
  std::string class_name;                   // set iff outcome == kLabel
  std::optional<std::string> matched_line;  // the answer-key line, verbatim
  std::vector<std::string> normalization_trace;
  std::string raw_text;  // carried on malformed outputs for audit
};

namespace detail {

// Markdown dressing that models wrap around the contract line; stripping it
// must never touch label characters (letters, digits, underscore).
inline std::string strip_markup(const std::string& line) {
  std::string out;
  out.reserve(line.size());
  for (char c : line)
    if (c != '*' && c != '`' && c != '#') out += c;
  return trim(out);
}

inline bool starts_with_ci(const std::string& s, const std::string& prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

}  // namespace detail

// Canonical answer form: lowercase; every character that is not a letter,
// digit, underscore, or space becomes a space; runs of whitespace collapse.
// Idempotent by construction.
inline std::string normalize_answer(const std::string& text,
                                    std::vector<std::string>* trace = nullptr) {
  std::string lowered = to_lower(text);
  if (trace) trace->push_back("lowercase");
  std::string stripped;
  stripped.reserve(lowered.size());
  for (char c : lowered) {
    unsigned char u = static_cast<unsigned char>(c);
    stripped += (std::isalnum(u) || c == '_') ? c : ' ';
  }
  if (trace) trace->push_back("strip_punctuation");
  std::string collapsed;
  bool in_space = true;  // also trims leading spaces
  for (char c : stripped) {
    if (c == ' ') {
      if (!in_space) collapsed += ' ';
      in_space = true;
    } else {
      collapsed += c;
      in_space = false;
    }
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  if (trace) trace->push_back("collapse_whitespace");
  return collapsed;
}

// Total function from raw model text to an outcome; never throws. The last
// line starting with answer_key is authoritative (reasoning text above it may
// mention labels freely). Without a key line, the whole text counts only if
// exactly one candidate token is mentioned.
inline ParsedAnswer parse_answer(const std::string& raw, const std::string& answer_key,
                                 const std::vector<std::string>& label_space,
                                 const std::vector<std::string>& rejection_tokens) {
  ParsedAnswer ans;

  auto match_candidates = [&](const std::string& normalized) -> std::optional<ParsedAnswer> {
    for (const auto& tok : rejection_tokens)
      if (normalized == normalize_answer(tok)) {
        ParsedAnswer a;
        a.outcome = Outcome::kRejected;
        return a;
      }
    for (const auto& label : label_space)
      if (normalized == normalize_answer(label)) {
        ParsedAnswer a;
        a.outcome = Outcome::kLabel;
        a.class_name = label;
        return a;
      }
    return std::nullopt;
  };

  // Last answer-key line wins.
  if (!answer_key.empty()) {
    std::vector<std::string> lines = split_lines(raw);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      std::string clean = detail::strip_markup(*it);
      if (!detail::starts_with_ci(clean, answer_key)) continue;
      std::string payload = clean.substr(answer_key.size());
      std::string normalized = normalize_answer(payload, &ans.normalization_trace);
      ans.matched_line = *it;
      if (auto matched = match_candidates(normalized)) {
        matched->matched_line = ans.matched_line;
        matched->normalization_trace = ans.normalization_trace;
        return *matched;
      }
      ans.outcome = Outcome::kMalformed;
      ans.raw_text = raw;
      return ans;
    }
  }

  // Fallback: the whole text names exactly one candidate (as a whole word).
  std::string normalized = normalize_answer(raw, &ans.normalization_trace);
  ans.normalization_trace.push_back("whole_text_fallback");
  std::vector<std::string> tokens;
  {
    size_t pos = 0;
    while (pos < normalized.size()) {
      size_t sp = normalized.find(' ', pos);
      if (sp == std::string::npos) sp = normalized.size();
      if (sp > pos) tokens.push_back(normalized.substr(pos, sp - pos));
      pos = sp + 1;
    }
  }
  std::optional<ParsedAnswer> unique;
  auto consider = [&](const std::string& candidate, bool rejection) {
    std::string want = normalize_answer(candidate);
    if (std::find(tokens.begin(), tokens.end(), want) == tokens.end()) return true;
    if (unique) return false;  // second distinct candidate: ambiguous
    ParsedAnswer a;
    a.outcome = rejection ? Outcome::kRejected : Outcome::kLabel;
    if (!rejection) a.class_name = candidate;
    unique = a;
    return true;
  };
  bool unambiguous = true;
  for (const auto& tok : rejection_tokens)
    if (!consider(tok, true)) unambiguous = false;
  for (const auto& label : label_space)
    if (!consider(label, false)) unambiguous = false;

  if (unambiguous && unique) {
    unique->normalization_trace = ans.normalization_trace;
    return *unique;
  }
  ans.outcome = Outcome::kMalformed;
  ans.raw_text = raw;
  return ans;
}

// Caption cleanup: drop a leading "Caption:" style prefix and one layer of
// wrapping quotes. nullopt marks an empty (malformed) caption.
inline std::optional<std::string> parse_caption(const std::string& raw) {
  std::string s = trim(raw);
  for (const char* prefix : {"caption:", "description:"}) {
    std::string clean = detail::strip_markup(s);
    if (detail::starts_with_ci(clean, prefix)) {
      s = trim(clean.substr(std::string(prefix).size()));
      break;
    }
  }
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    s = trim(s.substr(1, s.size() - 2));
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace vlmuq
