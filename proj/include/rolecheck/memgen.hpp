#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rolecheck/corpus.hpp"

namespace rolecheck {

class Provider;
class TemplateSet;

enum class MemoryCategory { event, relational, attitudinal, identity };

inline constexpr MemoryCategory kAllCategories[] = {MemoryCategory::event, MemoryCategory::relational,
                                                    MemoryCategory::attitudinal, MemoryCategory::identity};

std::string to_string(MemoryCategory c);          // "event"
std::string category_label(MemoryCategory c);     // "Event Memory"
MemoryCategory category_from_string(const std::string& s);
// Parses a bracket label such as "Event Memory" (case-insensitive,
// whitespace tolerant). Synonyms are not accepted.
std::optional<MemoryCategory> category_from_label(const std::string& label);

enum class ScreeningStatus { pending, kept, rejected };
std::string to_string(ScreeningStatus s);
ScreeningStatus screening_status_from_string(const std::string& s);

struct Memory {
  std::string memory_id;
  std::string character_id;
  std::string chunk_id;
  MemoryCategory category = MemoryCategory::event;
  std::string text;
  int word_count = 0;
  ScreeningStatus screening_status = ScreeningStatus::pending;
  std::string reject_reason;

  nlohmann::json to_json() const;
  static Memory from_json(const nlohmann::json& j);
};

struct ParsedMemories {
  std::vector<std::pair<MemoryCategory, std::string>> items;
  std::vector<std::string> rejects;
};

// Total function: segments are separated by blank lines and must read
// "[<Category> Memory] <text>"; anything else lands in `rejects`.
ParsedMemories parse_memory_block(const std::string& response);
std::string serialize_memory_block(const std::vector<std::pair<MemoryCategory, std::string>>& items);

struct GeneratedMemories {
  std::vector<Memory> memories;
  std::vector<std::string> rejects;
};

std::string memory_generation_prompt(const TemplateSet& templates, const std::string& role_name,
                                     const std::string& memory_chunk);

// Fills the memory-generation prompt, calls the constructor endpoint and
// parses the reply. Throws ParseFailure (carrying the rejects) when no
// well-formed memory is found.
GeneratedMemories generate_memories(const Chunk& chunk, const std::string& role_name, Provider& provider,
                                    const std::string& endpoint_id, const TemplateSet& templates);

struct RuleFilterResult {
  std::vector<Memory> kept;
  std::vector<Memory> rejected;  // reject_reason: word_limit | not_first_person
};

inline constexpr int kMemoryWordLimit = 30;

// Rejects memories of kMemoryWordLimit or more words and memories that do
// not start with "I". Everything else stays pending for human screening.
RuleFilterResult rule_filter(std::vector<Memory> memories);

}  // namespace rolecheck
