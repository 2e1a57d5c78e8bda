#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rolecheck/corpus.hpp"
#include "rolecheck/dataset.hpp"
#include "rolecheck/inject.hpp"
#include "rolecheck/judge.hpp"
#include "rolecheck/memgen.hpp"
#include "rolecheck/retrieval.hpp"
#include "rolecheck/screening.hpp"
#include "rolecheck/strategies.hpp"
#include "rolecheck/text.hpp"
#include "rolecheck/errors.hpp"

namespace rolecheck {

class Provider;
class TemplateSet;

// Construction work directory:
//   characters.jsonl  chunks.jsonl  memories.jsonl  memgen_rejects.jsonl
//   queries.jsonl     verdicts_<kind>.jsonl  screening_<kind>.json
//   dataset.jsonl + dataset.manifest.json    indexes/<character_id>.idx
struct Workspace {
  std::filesystem::path dir;

  explicit Workspace(std::filesystem::path d) : dir(std::move(d)) {}
  std::string file(const std::string& name) const { return (dir / name).string(); }
  std::string index_file(const std::string& character_id) const {
    return (dir / "indexes" / (character_id + ".idx")).string();
  }
};

// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);  // throws IoError when held elsewhere
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

// T provides static from_json(json) and to_json().
template <typename T>
std::vector<T> read_jsonl(const std::string& path) {
  std::vector<T> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& line : text::read_lines(path)) {
    if (text::is_blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("'" + path + "' holds a line that is not JSON");
    out.push_back(T::from_json(j));
  }
  return out;
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
  std::string body;
  for (const auto& item : items) body += item.to_json().dump() + "\n";
  text::write_file(path, body);
}

std::vector<CharacterProfile> load_characters(const Workspace& ws);
std::vector<Chunk> load_chunks(const Workspace& ws);
std::vector<Memory> load_memories(const Workspace& ws);
std::vector<ErrorQuery> load_queries(const Workspace& ws);

CharacterProfile stage_ingest(const Workspace& ws, const std::string& profile_file,
                              const std::string& corpus_file = {});
int stage_chunk(const Workspace& ws, int target_sentences);

struct MemgenSummary {
  int chunks = 0;
  int generated = 0;
  int pending = 0;
  int rule_rejected = 0;
  int parse_failures = 0;  // chunks with no parseable memory
};
MemgenSummary stage_gen_memories(const Workspace& ws, Provider& provider, const std::string& endpoint,
                                 const TemplateSet& templates, int workers);

struct InjectSummary {
  int memories = 0;
  int queries = 0;
  int flagged = 0;
};
// Injects one kke and one uke error into every kept memory.
InjectSummary stage_inject(const Workspace& ws, Provider& provider, const std::string& endpoint,
                           const TemplateSet& templates, const SubDisciplineRegistry& registry, std::uint64_t seed,
                           int workers);

struct TransformSummary {
  int transformed = 0;
  int invalid = 0;  // failed question validation; marked rejected
};
TransformSummary stage_transform(const Workspace& ws, Provider& provider, const std::string& endpoint,
                                 const TemplateSet& templates, int workers);

// Loads pending items of `kind` into a store backed by verdicts_<kind>.jsonl.
std::unique_ptr<ScreeningStore> open_screening(const Workspace& ws, ItemKind kind,
                                               std::vector<std::string> roster = {});
// Applies the intersection to memories.jsonl or queries.jsonl (query pairs
// then go through the pair gate) and writes screening_<kind>.json.
ScreeningReport stage_finalize(const Workspace& ws, ItemKind kind, std::vector<std::string> roster = {},
                               int required_annotators = 3);

ProbingDataset stage_build_dataset(const Workspace& ws, std::uint64_t seed,
                                   const std::map<std::string, std::string>& template_hashes,
                                   const std::string& out_path = {});

// Builds and persists one index per character that has chunks.
std::map<std::string, CorpusIndex> stage_embed_index(const Workspace& ws, Provider& provider,
                                                     const std::string& embedder,
                                                     const std::vector<std::string>& character_ids = {});

struct RunOptions {
  std::string run_id;
  std::filesystem::path runs_dir = "runs";
  std::string dataset_path;
  std::filesystem::path work_dir;  // chunks + indexes; defaults to the dataset's directory
  StrategySpec spec;
  int trials = 3;
  int workers = 4;
  std::string case_bank;
  std::uint64_t seed = 0;
};

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<DetectionRecord> records;
  int narrative_calls = 0;
};

RunResult stage_run(const RunOptions& options, Provider& provider, const TemplateSet& templates);

struct JudgeOptions {
  std::filesystem::path run_dir;
  std::string judge;
  int trials = 0;  // 0: take from the run manifest
  int workers = 4;
};

// Writes judgments.jsonl and scores.json into the run directory.
ScoreTable stage_judge(const JudgeOptions& options, Provider& provider, const TemplateSet& templates);

// CSV sheet of `n` randomly chosen judged responses for manual checking.
std::string audit_sample(const std::filesystem::path& run_dir, int n, std::uint64_t seed);

}  // namespace rolecheck
