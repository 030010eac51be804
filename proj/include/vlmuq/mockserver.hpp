#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vlmuq/class_map.hpp"
#include "vlmuq/corpus.hpp"
#include "vlmuq/tagline.hpp"
#include "vlmuq/util.hpp"

namespace vlmuq {

struct MockRule {
  // Matchers; all present conditions must hold. A rule with none is a default.
  std::optional<std::string> prompt_contains;
  std::optional<std::string> prompt_lacks;
  std::optional<bool> rejection_clause;
  std::optional<std::string> tag_id;
  std::optional<std::string> tag_id_contains;
  std::optional<std::string> tag_truth;
  std::optional<std::string> tag_class;
  std::optional<int> tag_severity_gte;
  std::optional<int> tag_severity_lte;
  std::optional<int> tag_bin;
  std::optional<std::string> tag_index_parity;  // "even" / "odd"
  std::optional<std::string> tag_id_parity;     // parity of fnv1a64(id)

  std::string respond;  // template; see render_response for placeholders
  int status = 200;
  int latency_ms = 0;

  // Failure injection: the first `times` requests matching this rule get the
  // failure instead of the scripted response.
  int fail_status = 0;     // e.g. 429 or 500; 0 = none
  int fail_timeout_ms = 0; // sleep long enough for the client to give up
  int fail_times = 0;

  bool is_default() const {
    return !prompt_contains && !prompt_lacks && !rejection_clause && !tag_id &&
           !tag_id_contains && !tag_truth && !tag_class && !tag_severity_gte &&
           !tag_severity_lte && !tag_bin && !tag_index_parity && !tag_id_parity;
  }

  bool matches(const std::string& prompt, const TagInfo& tag) const {
    if (prompt_contains && prompt.find(*prompt_contains) == std::string::npos)
      return false;
    if (prompt_lacks && prompt.find(*prompt_lacks) != std::string::npos) return false;
    if (rejection_clause) {
      bool found = false;
      for (const auto& marker : rejection_clause_markers())
        if (prompt.find(marker) != std::string::npos) found = true;
      if (found != *rejection_clause) return false;
    }
    if (tag_id && (!tag.present || tag.id != *tag_id)) return false;
    if (tag_id_contains &&
        (!tag.present || tag.id.find(*tag_id_contains) == std::string::npos))
      return false;
    if (tag_truth && (!tag.present || tag.truth != *tag_truth)) return false;
    if (tag_class && (!tag.present || tag.class_name != *tag_class)) return false;
    if (tag_severity_gte && (!tag.present || tag.severity < *tag_severity_gte))
      return false;
    if (tag_severity_lte && (!tag.present || tag.severity > *tag_severity_lte))
      return false;
    if (tag_bin && (!tag.present || tag.bin != std::to_string(*tag_bin))) return false;
    if (tag_index_parity) {
      if (!tag.present) return false;
      bool odd = (tag.index & 1) != 0;
      if ((*tag_index_parity == "odd") != odd) return false;
    }
    if (tag_id_parity) {
      if (!tag.present) return false;
      bool odd = (fnv1a64(tag.id) & 1) != 0;
      if ((*tag_id_parity == "odd") != odd) return false;
    }
    return true;
  }
};

struct MockEmbeddingSpec {
  std::string mode = "hash_unit";  // or "orthogonal"
  int dims = 64;
};

// Scripted behavior for the mock endpoint: ordered rules, first match wins.
struct MockScript {
  std::vector<MockRule> rules;
  MockEmbeddingSpec embedding;

  void validate() const {
    if (rules.empty()) throw ValidationError("mock script has no rules");
    bool has_default = false;
    for (const auto& r : rules) has_default |= r.is_default();
    if (!has_default) throw ValidationError("mock script needs a default rule");
    if (embedding.mode != "hash_unit" && embedding.mode != "orthogonal")
      throw ValidationError("unknown mock embedding mode: " + embedding.mode);
    if (embedding.dims < 2) throw ValidationError("mock embedding dims must be >= 2");
  }

  static MockScript from_json(const nlohmann::json& j) {
    MockScript s;
    if (j.contains("embedding")) {
      s.embedding.mode = j["embedding"].value("mode", "hash_unit");
      s.embedding.dims = j["embedding"].value("dims", 64);
    }
    for (const auto& rj : j.at("rules")) {
      MockRule r;
      if (rj.contains("when")) {
        const auto& w = rj["when"];
        auto opt_str = [&](const char* k) -> std::optional<std::string> {
          if (w.contains(k)) return w[k].get<std::string>();
          return std::nullopt;
        };
        auto opt_int = [&](const char* k) -> std::optional<int> {
          if (w.contains(k)) return w[k].get<int>();
          return std::nullopt;
        };
        r.prompt_contains = opt_str("prompt_contains");
        r.prompt_lacks = opt_str("prompt_lacks");
        if (w.contains("rejection_clause"))
          r.rejection_clause = w["rejection_clause"].get<bool>();
        r.tag_id = opt_str("tag_id");
        r.tag_id_contains = opt_str("tag_id_contains");
        r.tag_truth = opt_str("tag_truth");
        r.tag_class = opt_str("tag_class");
        r.tag_severity_gte = opt_int("tag_severity_gte");
        r.tag_severity_lte = opt_int("tag_severity_lte");
        r.tag_bin = opt_int("tag_bin");
        r.tag_index_parity = opt_str("tag_index_parity");
        r.tag_id_parity = opt_str("tag_id_parity");
      }
      r.respond = rj.at("respond").get<std::string>();
      r.status = rj.value("status", 200);
      r.latency_ms = rj.value("latency_ms", 0);
      if (rj.contains("fail")) {
        const auto& f = rj["fail"];
        r.fail_status = f.value("status", 0);
        r.fail_timeout_ms = f.value("timeout_ms", 0);
        r.fail_times = f.value("times", 1);
      }
      s.rules.push_back(std::move(r));
    }
    s.validate();
    return s;
  }

  static MockScript from_file(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_file(path)));
  }

  // Ideal rejector: anomalies answer "unknown", everything else its true class.
  static MockScript oracle() {
    nlohmann::json j = {
        {"rules",
         {{{"when", {{"tag_truth", "anomaly"}}},
           {"respond", "Reasoning: this does not belong to the listed classes.\n"
                       "Answer: unknown"}},
          {{"respond", "Reasoning: clearly recognizable.\nAnswer: {class}"}}}}};
    return from_json(j);
  }
};

namespace detail {

// Label spaces by manifest task name, for the {other_class} placeholder.
inline const std::vector<std::string>& mock_label_space(const std::string& task) {
  static const std::vector<std::string> ecg = {"normal", "abnormal"};
  static const std::vector<std::string> none = {};
  if (task == "cifar_vs_not" || task == "imagenetc_reject") return cifar10_classes();
  if (task == "ecg_vs_not") return ecg;
  if (task == "galaxy_reject") return galaxy_classes();
  return none;
}

inline std::string replace_all(std::string text, const std::string& from,
                               const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

}  // namespace detail

// Placeholders: {id} {task} {truth} {class} {severity} {bin} {index},
// {other_class} = a deterministic wrong in-space label, and
// {variant_sev} = index % (severity + 1), which makes caption variety grow
// with corruption severity in an exactly computable way.
inline std::string render_mock_response(const std::string& tmpl, const TagInfo& tag) {
  std::string out = tmpl;
  out = detail::replace_all(out, "{id}", tag.id);
  out = detail::replace_all(out, "{task}", tag.task);
  out = detail::replace_all(out, "{truth}", tag.truth);
  out = detail::replace_all(out, "{class}", tag.class_name == "-" ? "" : tag.class_name);
  out = detail::replace_all(out, "{severity}", std::to_string(tag.severity));
  out = detail::replace_all(out, "{bin}", tag.bin);
  out = detail::replace_all(out, "{index}", std::to_string(tag.index));
  if (out.find("{other_class}") != std::string::npos) {
    const auto& space = detail::mock_label_space(tag.task);
    std::string other;
    if (!space.empty()) {
      size_t at = 0;
      for (size_t i = 0; i < space.size(); ++i)
        if (space[i] == tag.class_name) at = i;
      other = space[(at + 1) % space.size()];
      if (other == tag.class_name) other = space[0];
    }
    out = detail::replace_all(out, "{other_class}", other);
  }
  if (out.find("{variant_sev}") != std::string::npos)
    out = detail::replace_all(out, "{variant_sev}",
                              std::to_string(tag.index % (tag.severity + 1)));
  return out;
}

// Deterministic pseudo-embeddings. hash_unit: a seeded unit vector per
// distinct text. orthogonal: a basis vector picked by the last integer in the
// text, giving exact pairwise cosines of 0 or 1.
inline std::vector<double> mock_embedding(const std::string& text,
                                          const MockEmbeddingSpec& spec) {
  std::vector<double> v(static_cast<size_t>(spec.dims), 0.0);
  if (spec.mode == "orthogonal") {
    std::optional<uint64_t> last_number;
    for (size_t i = 0; i < text.size(); ++i) {
      if (std::isdigit(static_cast<unsigned char>(text[i]))) {
        size_t j = i;
        uint64_t n = 0;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          n = n * 10 + (text[j] - '0');
          ++j;
        }
        last_number = n;
        i = j - 1;
      }
    }
    uint64_t index = last_number ? *last_number : fnv1a64(text);
    v[index % spec.dims] = 1.0;
    return v;
  }
  std::mt19937_64 rng(splitmix64(fnv1a64(text)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = gauss(rng);
    norm2 += x * x;
  }
  double norm = std::sqrt(norm2);
  for (auto& x : v) x /= norm;
  return v;
}

// In-process OpenAI-compatible stub. Responses are pure functions of
// (script, request); counters expose the request volume and the concurrency
// high-water mark for client tests.
class MockServer {
 public:
  explicit MockServer(MockScript script) : script_(std::move(script)) {
    script_.validate();
    rule_fail_counts_ = std::vector<std::atomic<int>>(script_.rules.size());
    for (auto& c : rule_fail_counts_) c = 0;
    install_handlers();
  }

  ~MockServer() { stop(); }

  // Binds 127.0.0.1 (given port, or a free one when 0) and serves on a
  // background thread until stop().
  void start(int port = 0) {
    if (thread_.joinable()) throw std::runtime_error("mock server already started");
    if (port == 0) {
      port_ = svr_.bind_to_any_port("127.0.0.1");
      if (port_ < 0) throw std::runtime_error("mock server could not bind a port");
    } else {
      if (!svr_.bind_to_port("127.0.0.1", port))
        throw std::runtime_error("mock server could not bind port " +
                                 std::to_string(port));
      port_ = port;
    }
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }

  void stop() {
    if (thread_.joinable()) {
      svr_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  int64_t request_count() const { return request_count_.load(); }
  int64_t chat_count() const { return chat_count_.load(); }
  int64_t embed_count() const { return embed_count_.load(); }
  int max_concurrent() const { return max_concurrent_.load(); }

 private:
  struct InFlight {
    explicit InFlight(MockServer& s) : s_(s) {
      int now = ++s_.in_flight_;
      int seen = s_.max_concurrent_.load();
      while (now > seen && !s_.max_concurrent_.compare_exchange_weak(seen, now)) {
      }
    }
    ~InFlight() { --s_.in_flight_; }
    MockServer& s_;
  };

  void install_handlers() {
    svr_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                             httplib::Response& res) {
      InFlight guard(*this);
      ++request_count_;
      ++chat_count_;
      handle_chat(req, res);
    });
    svr_.Post("/v1/embeddings", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      InFlight guard(*this);
      ++request_count_;
      ++embed_count_;
      handle_embeddings(req, res);
    });
    svr_.Get("/__stats", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json j{{"request_count", request_count_.load()},
                       {"chat_count", chat_count_.load()},
                       {"embed_count", embed_count_.load()},
                       {"max_concurrent", max_concurrent_.load()}};
      res.set_content(j.dump(), "application/json");
    });
  }

  void handle_chat(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad request"}})", "application/json");
      return;
    }
    std::string model = body.value("model", "mock-model");
    std::string prompt_text;
    for (const auto& msg : body["messages"]) {
      if (!msg.contains("content")) continue;
      if (msg["content"].is_string()) {
        prompt_text += msg["content"].get<std::string>();
      } else if (msg["content"].is_array()) {
        for (const auto& part : msg["content"])
          if (part.value("type", "") == "text") prompt_text += part.value("text", "");
      }
    }
    TagInfo tag = parse_tag_line(prompt_text);

    for (size_t i = 0; i < script_.rules.size(); ++i) {
      const MockRule& rule = script_.rules[i];
      if (!rule.matches(prompt_text, tag)) continue;
      if ((rule.fail_status > 0 || rule.fail_timeout_ms > 0) &&
          rule_fail_counts_[i].fetch_add(1) < rule.fail_times) {
        if (rule.fail_timeout_ms > 0)
          std::this_thread::sleep_for(std::chrono::milliseconds(rule.fail_timeout_ms));
        if (rule.fail_status > 0) {
          res.status = rule.fail_status;
          res.set_content(R"({"error":{"message":"injected failure"}})",
                          "application/json");
          return;
        }
      } else if (rule.fail_status > 0 || rule.fail_timeout_ms > 0) {
        rule_fail_counts_[i].fetch_sub(1);  // quota spent; keep the counter pinned
      }
      if (rule.latency_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(rule.latency_ms));
      if (rule.status != 200) {
        res.status = rule.status;
        res.set_content(R"({"error":{"message":"scripted failure"}})",
                        "application/json");
        return;
      }
      std::string reply = render_mock_response(rule.respond, tag);
      nlohmann::json out{
          {"id", "chatcmpl-mock"},
          {"object", "chat.completion"},
          {"created", 0},
          {"model", model},
          {"choices",
           {{{"index", 0},
             {"message", {{"role", "assistant"}, {"content", reply}}},
             {"finish_reason", "stop"}}}},
          {"usage",
           {{"prompt_tokens", static_cast<int64_t>(prompt_text.size() / 4)},
            {"completion_tokens", static_cast<int64_t>(reply.size() / 4)},
            {"total_tokens",
             static_cast<int64_t>(prompt_text.size() / 4 + reply.size() / 4)}}}};
      res.set_content(out.dump(), "application/json");
      return;
    }
    res.status = 500;
    res.set_content(R"({"error":{"message":"no rule matched"}})", "application/json");
  }

  void handle_embeddings(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("input")) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad request"}})", "application/json");
      return;
    }
    std::vector<std::string> texts;
    if (body["input"].is_string()) {
      texts.push_back(body["input"].get<std::string>());
    } else if (body["input"].is_array()) {
      for (const auto& t : body["input"]) texts.push_back(t.get<std::string>());
    }
    nlohmann::json data = nlohmann::json::array();
    for (size_t i = 0; i < texts.size(); ++i) {
      data.push_back({{"object", "embedding"},
                      {"index", i},
                      {"embedding", mock_embedding(texts[i], script_.embedding)}});
    }
    nlohmann::json out{{"object", "list"},
                       {"data", data},
                       {"model", body.value("model", "mock-embedder")},
                       {"usage", {{"prompt_tokens", 0}, {"total_tokens", 0}}}};
    res.set_content(out.dump(), "application/json");
  }

  MockScript script_;
  std::vector<std::atomic<int>> rule_fail_counts_;
  httplib::Server svr_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int64_t> request_count_{0};
  std::atomic<int64_t> chat_count_{0};
  std::atomic<int64_t> embed_count_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_concurrent_{0};
};

}  // namespace vlmuq
