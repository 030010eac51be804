#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vlmuq {

// Identity tag the runner appends to prompts on tag-enabled (mock) endpoints:
// [vlmuq-tag id=... task=... truth=... class=... severity=... bin=... index=...]
// The mock never does vision; this line is how scripts see the image identity.
struct TagInfo {
  bool present = false;
  std::string id;
  std::string task;
  std::string truth;       // "anomaly" / "in_label_space"
  std::string class_name;  // "-" when absent
  int severity = 0;
  std::string bin;  // "-" when absent
  int index = 0;
};

inline std::string format_tag_line(const std::string& id, const std::string& task,
                                   bool anomaly, const std::string& class_name,
                                   int severity, std::optional<int> bin, int index) {
  return "[vlmuq-tag id=" + id + " task=" + task +
         " truth=" + (anomaly ? "anomaly" : "in_label_space") +
         " class=" + (class_name.empty() ? "-" : class_name) +
         " severity=" + std::to_string(severity) +
         " bin=" + (bin ? std::to_string(*bin) : "-") +
         " index=" + std::to_string(index) + "]";
}

inline TagInfo parse_tag_line(const std::string& prompt_text) {
  TagInfo tag;
  size_t start = prompt_text.rfind("[vlmuq-tag ");
  if (start == std::string::npos) return tag;
  size_t end = prompt_text.find(']', start);
  if (end == std::string::npos) return tag;
  std::string body = prompt_text.substr(start + 11, end - start - 11);
  std::map<std::string, std::string> kv;
  size_t pos = 0;
  while (pos < body.size()) {
    size_t sp = body.find(' ', pos);
    if (sp == std::string::npos) sp = body.size();
    std::string pair = body.substr(pos, sp - pos);
    size_t eq = pair.find('=');
    if (eq != std::string::npos) kv[pair.substr(0, eq)] = pair.substr(eq + 1);
    pos = sp + 1;
  }
  tag.present = true;
  tag.id = kv["id"];
  tag.task = kv["task"];
  tag.truth = kv["truth"];
  tag.class_name = kv["class"];
  if (!kv["severity"].empty() && kv["severity"] != "-")
    tag.severity = std::stoi(kv["severity"]);
  tag.bin = kv["bin"].empty() ? "-" : kv["bin"];
  if (!kv["index"].empty()) tag.index = std::stoi(kv["index"]);
  return tag;
}

// Substrings that exist in a prompt iff its rejection clause is enabled; used
// by the "rejection_clause" matcher so scripts need not quote clause text.
inline const std::vector<std::string>& rejection_clause_markers() {
  static const std::vector<std::string> markers = {
      "if not, label them as",
      "if the signal does NOT look like",
      "very ambiguous and cannot confidently classify",
  };
  return markers;
}

}  // namespace vlmuq
