#pragma once

#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/dataset.hpp"
#include "rolecheck/prompts.hpp"
#include "rolecheck/retrieval.hpp"

namespace rolecheck {

class Provider;

enum class StrategyKind { vanilla, cot, few_shot, self_reflection, rag, rag_few_shot, s2rd };
inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::vanilla,         StrategyKind::cot,
                                                  StrategyKind::few_shot,        StrategyKind::self_reflection,
                                                  StrategyKind::rag,             StrategyKind::rag_few_shot,
                                                  StrategyKind::s2rd};
std::string to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string& s);
bool needs_index(StrategyKind k);
bool needs_cases(StrategyKind k);

// Four worked examples (two kke, two uke) shared by the few-shot style
// strategies and S2RD.
class CaseBank {
 public:
  CaseBank() = default;
  // Throws ConfigError unless there are exactly 4 cases, 2 of each type.
  explicit CaseBank(std::vector<Case> cases);
  // JSON array or JSON lines of {query, response, error_type}.
  static CaseBank load(const std::string& path);

  const std::vector<Case>& cases() const noexcept { return cases_; }
  // Throws CaseOverlap when a case query equals a dataset query.
  void check_overlap(const ProbingDataset& dataset) const;

 private:
  std::vector<Case> cases_;
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::vanilla;
  std::string responder;  // chat endpoint id
  std::string embedder;   // embedding endpoint id, rag kinds and s2rd
  int k_retrieval = 3;
  int m_seeds = 3;
  int k_per_seed = 1;
  int iterations = 1;  // s2rd recollection -> doubt passes

  void check() const;  // throws ConfigError
  nlohmann::json to_json() const;
};

struct CallSummary {
  std::string stage;  // e.g. "answer", "reflection", "recollection", "seed_retrieval", "doubt"
  std::string kind;   // "chat" | "embed"
  std::string prompt_sha256;
  bool cache_hit = false;
  int attempts = 0;

  // cache_hit and attempts depend on which worker reached a shared request
  // first, so deterministic outputs leave them out.
  nlohmann::json to_json(bool with_telemetry = true) const;
  static CallSummary from_json(const nlohmann::json& j);
};

struct RetrievedChunk {
  std::string chunk_id;
  double score = 0.0;
  std::string text;
};

struct Trace {
  std::optional<std::string> narrative;
  std::optional<std::vector<std::string>> seed_memories;
  std::optional<std::vector<RetrievedChunk>> recollection;  // K_rec
  std::optional<std::string> doubt;
  std::optional<std::vector<RetrievedChunk>> retrieved_context;
  std::optional<std::string> reflection_first_pass;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static Trace from_json(const nlohmann::json& j);
};

struct DetectionRecord {
  std::string query_id;
  StrategyKind strategy = StrategyKind::vanilla;
  std::string responder;
  int trial_index = 0;
  std::string response_text;
  Trace trace;
  std::vector<CallSummary> call_log;

  nlohmann::json to_json(bool with_telemetry = true) const;
  static DetectionRecord from_json(const nlohmann::json& j);
};

// Everything a strategy needs to know about one character.
struct CharacterContext {
  CharacterProfile profile;
  std::optional<CorpusIndex> index;
  std::map<std::string, std::string> chunk_text;
};

// One narrative per (character, responder) for the lifetime of the cache.
class NarrativeCache {
 public:
  // Returns the cached narrative, computing it with `make` on first use.
  // Concurrent callers for the same key wait for the single computation.
  std::string get_or_create(const std::string& character_id, const std::string& responder,
                            const std::function<std::string()>& make, bool* created = nullptr);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::shared_future<std::string>> entries_;
};

class StrategyRunner {
 public:
  StrategyRunner(Provider& provider, const TemplateSet& templates, std::map<std::string, CharacterContext> characters,
                 std::optional<CaseBank> cases, NarrativeCache& narratives);

  // Generates the S2RD narrative for every character up front so the
  // per-record call logs never depend on scheduling. Returns the number of
  // narrative calls made.
  int prepare_narratives(const std::string& responder);

  DetectionRecord run(const DatasetRecord& record, const StrategySpec& spec, int trial_index);

  // All records x trials on a bounded pool, ordered by (query_id, trial).
  std::vector<DetectionRecord> run_all(const std::vector<DatasetRecord>& records, const StrategySpec& spec,
                                       int trials, int workers);

  const CharacterContext& character(const std::string& character_id) const;

 private:
  std::string chat(const StrategySpec& spec, const CharacterContext& ch, const std::string& stage,
                   const std::string& prompt, const std::string& salt, DetectionRecord& rec);
  std::vector<RetrievedChunk> retrieve(const StrategySpec& spec, const CharacterContext& ch, const std::string& stage,
                                       const std::string& text, int k, DetectionRecord& rec);
  std::string narrative(const StrategySpec& spec, const CharacterContext& ch, DetectionRecord* rec);
  const std::vector<Case>& require_cases() const;

  void run_s2rd(const DatasetRecord& r, const StrategySpec& spec, const CharacterContext& ch, const std::string& salt,
                DetectionRecord& rec);

  Provider& provider_;
  const TemplateSet& templates_;
  std::map<std::string, CharacterContext> characters_;
  std::optional<CaseBank> cases_;
  NarrativeCache& narratives_;
};

// Splits a recollection reply into seed memories: blank-line separated
// segments, with template echo markers such as "<memory 1>" dropped.
std::vector<std::string> parse_seed_memories(const std::string& reply);

}  // namespace rolecheck
