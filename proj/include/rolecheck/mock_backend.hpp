#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include "rolecheck/provider.hpp"

namespace rolecheck {

enum class MatchKind { exact, prefix, contains, regex, any };

MatchKind match_kind_from_string(const std::string& s);

struct MockOutcome {
  enum class Kind { text, transport_error, refusal, empty };
  Kind kind = Kind::text;
  std::string text;

  static MockOutcome reply(std::string t) { return {Kind::text, std::move(t)}; }
  static MockOutcome transport_failure() { return {Kind::transport_error, {}}; }
  static MockOutcome refusal() { return {Kind::refusal, {}}; }
  static MockOutcome empty_reply() { return {Kind::empty, {}}; }
};

struct MockCall {
  EndpointKind kind = EndpointKind::chat;
  std::string endpoint_id;
  std::vector<std::string> texts;  // user_text for chat, inputs for embed
};

// Script-driven backend for offline runs. Rules are tried in insertion
// order; the first match answers. A chat rule walks its response list one
// entry per call and then keeps repeating the last entry. Requests that no
// rule matches throw UnmatchedMockRequest.
//
// Script file (JSON):
//   {"chat":  [{"match": "exact|prefix|contains|regex|any", "pattern": "...",
//               "field": "user|system", "endpoint": "<optional id>",
//               "responses": ["text", {"fail": "transport|refusal|empty"}]}],
//    "embed": [{"match": "...", "pattern": "...", "vector": [..]} |
//              {"match": "any", "hash_dim": 32}],
//    "latency_ms": 0}
// Regex rule responses may reference capture groups as $1..$9.
class MockBackend : public Backend {
 public:
  MockBackend() = default;

  static std::shared_ptr<MockBackend> from_json(const nlohmann::json& script);
  static std::shared_ptr<MockBackend> from_file(const std::string& path);

  MockBackend& on_chat(MatchKind match, std::string pattern, std::vector<MockOutcome> responses,
                       std::string field = "user", std::string endpoint = {});
  MockBackend& on_chat(MatchKind match, std::string pattern, std::string response);
  MockBackend& on_embed(MatchKind match, std::string pattern, std::vector<double> vector);
  MockBackend& on_embed_hashed(MatchKind match, std::string pattern, int dim);
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  ChatReply chat(const ModelEndpoint& endpoint, const ChatRequest& request) override;
  std::vector<std::vector<double>> embed(const ModelEndpoint& endpoint,
                                         std::span<const std::string> texts) override;

  std::vector<MockCall> calls() const;
  std::size_t chat_calls() const;
  std::size_t embed_calls() const;
  int peak_in_flight() const { return peak_in_flight_.load(); }
  void clear_log();

 private:
  struct Rule {
    MatchKind match = MatchKind::any;
    std::string pattern;
    std::regex compiled;
    std::string field = "user";
    std::string endpoint;
    std::vector<MockOutcome> responses;
    std::size_t next = 0;
    std::vector<double> vector;
    int hash_dim = 0;
  };

  static Rule make_rule(MatchKind match, std::string pattern);
  static bool matches(const Rule& rule, const std::string& subject, std::smatch* groups);
  void enter();
  void leave();

  mutable std::mutex mu_;
  std::vector<Rule> chat_rules_;
  std::vector<Rule> embed_rules_;
  std::vector<MockCall> log_;
  std::chrono::milliseconds latency_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
};

// Deterministic bag-of-words embedding: lower-cased alphanumeric tokens are
// hashed into `dim` signed buckets. Never returns the zero vector.
std::vector<double> hashed_embedding(std::string_view text, int dim);

}  // namespace rolecheck
