#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/memgen.hpp"

namespace rolecheck {

class Provider;
class TemplateSet;

enum class ErrorType { kke, uke };
std::string to_string(ErrorType t);
ErrorType error_type_from_string(const std::string& s);

class SubDisciplineRegistry {
 public:
  SubDisciplineRegistry() = default;
  // Throws ConfigError on duplicate or blank terms.
  explicit SubDisciplineRegistry(std::vector<std::string> terms);

  static SubDisciplineRegistry builtin();  // the shipped 361-term list
  static SubDisciplineRegistry load(const std::string& path);  // one term per line

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t count() const noexcept { return terms_.size(); }
  bool contains(const std::string& term) const;

 private:
  std::vector<std::string> terms_;
};

struct ErrorQuery {
  std::string query_id;
  std::string memory_id;
  ErrorType error_type = ErrorType::kke;
  std::string query_text;
  std::string false_memory;
  std::string explanation;
  std::vector<std::string> topics;  // uke only: two registry terms
  ScreeningStatus screening_status = ScreeningStatus::pending;
  // Set when the false memory differs from the source in more than one
  // disjoint word region; a hint for reviewers, never an automatic reject.
  bool review_flag = false;

  nlohmann::json to_json() const;
  static ErrorQuery from_json(const nlohmann::json& j);
};

std::string query_id_for(const std::string& memory_id, ErrorType type);

struct Injection {
  std::string explanation;
  std::string false_memory;
  std::vector<std::string> topics;
};

// Parses "[explanation] ...\n\n[manipulate] ..." (markers case-insensitive).
Injection parse_injection(const std::string& response);

std::string kke_prompt(const TemplateSet& templates, const Memory& memory, const std::string& role_name);
std::string uke_prompt(const TemplateSet& templates, const Memory& memory, const std::string& role_name,
                       const std::string& topic1, const std::string& topic2);
std::string question_prompt(const TemplateSet& templates, const std::string& false_memory,
                            const std::string& role_name);

Injection inject_kke(const Memory& memory, const std::string& role_name, Provider& provider,
                     const std::string& endpoint_id, const TemplateSet& templates);

// Per-memory seed so that worker order never changes sampling.
std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& memory_id);

// Two distinct terms, uniformly without replacement. Throws RegistryTooSmall.
std::array<std::string, 2> sample_topics(const SubDisciplineRegistry& registry, std::uint64_t seed);

Injection inject_uke(const Memory& memory, const std::string& role_name, const SubDisciplineRegistry& registry,
                     std::uint64_t seed, Provider& provider, const std::string& endpoint_id,
                     const TemplateSet& templates);

inline const std::vector<std::string> kDefaultInterrogatives = {"Do",  "Did", "Were", "Was",  "Are",
                                                                "Is",  "Have", "Had", "Can", "Would"};

// Throws ValidationFailure naming the failed property: empty,
// not_interrogative, not_second_person, missing_terminator,
// multiple_questions.
void validate_question(const std::string& question,
                       const std::vector<std::string>& interrogatives = kDefaultInterrogatives);

std::string to_question(const std::string& false_memory, const std::string& role_name, Provider& provider,
                        const std::string& endpoint_id, const TemplateSet& templates,
                        const std::vector<std::string>& interrogatives = kDefaultInterrogatives);

// Number of disjoint edited regions in a word-level diff of a vs b.
int edit_region_count(const std::string& a, const std::string& b);

// Both queries of a memory survive only if both were kept.
struct PairGateResult {
  ScreeningStatus kke;
  ScreeningStatus uke;
  bool kept() const { return kke == ScreeningStatus::kept; }
};
PairGateResult pair_gate(ScreeningStatus kke_status, ScreeningStatus uke_status);

}  // namespace rolecheck
