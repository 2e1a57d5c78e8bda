#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/corpus.hpp"
#include "rolecheck/inject.hpp"
#include "rolecheck/memgen.hpp"

namespace rolecheck {

struct DatasetRecord {
  std::string query_id;
  std::string character_id;
  std::string memory_id;
  std::string chunk_id;
  MemoryCategory memory_category = MemoryCategory::event;
  ErrorType error_type = ErrorType::kke;
  std::string query;
  std::string source_memory;
  std::string false_memory;
  std::string explanation;
  std::vector<std::string> topics;

  nlohmann::json to_json() const;
  static DatasetRecord from_json(const nlohmann::json& j);
  bool operator==(const DatasetRecord&) const = default;
};

struct ProbingDataset {
  std::vector<DatasetRecord> records;  // ordered by (character_id, memory_id, error_type)
  std::vector<CharacterProfile> characters;
  std::string version = "1";
  std::uint64_t construction_seed = 0;
  std::map<std::string, std::string> template_hashes;

  const DatasetRecord* find(const std::string& query_id) const;
  const CharacterProfile* character(const std::string& character_id) const;
};

struct AssembleInput {
  std::vector<ErrorQuery> queries;  // screening_status carried on each query
  std::vector<Memory> memories;
  std::vector<CharacterProfile> profiles;
  // When non-empty, every memory's chunk_id must resolve here.
  std::vector<Chunk> chunks;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> template_hashes;
};

// Applies the pair gate (a memory contributes only when both its queries
// were kept) and orders records deterministically. Throws IntegrityError
// naming the first orphan reference.
ProbingDataset assemble(const AssembleInput& input);

// Structural invariants: one kke and one uke per memory, unique query ids,
// matching per-category counts across error types, resolvable characters.
// Throws IntegrityError.
void validate(const ProbingDataset& dataset);

// Writes <path> (jsonl) and <path minus .jsonl>.manifest.json.
void save(const ProbingDataset& dataset, const std::string& path);
ProbingDataset load(const std::string& path);
std::string manifest_path_for(const std::string& dataset_path);

struct StatsCell {
  int count = 0;
  double mean_words = 0.0;  // unrounded
};

struct DatasetStats {
  // keyed by error type ("kke", "uke", "total"), then category or "total"
  std::map<std::string, std::map<std::string, StatsCell>> cells;

  const StatsCell& at(const std::string& error_type, const std::string& category) const;
  nlohmann::json to_json() const;
};

// Throws EmptyDataset.
DatasetStats stats(const ProbingDataset& dataset);
// Markdown table, one row per category plus a totals row, cells "count/mean".
std::string render_stats(const DatasetStats& s);

}  // namespace rolecheck
