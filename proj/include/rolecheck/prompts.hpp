#pragma once

#include <string>
#include <vector>

#include "rolecheck/inject.hpp"
#include "rolecheck/templates.hpp"

namespace rolecheck {

// A worked example for the few-shot style prompts.
struct Case {
  std::string query;
  std::string response;
  ErrorType tag = ErrorType::kke;
};

// "Question: <query>\nResponse: <response>"
std::string serialize_case(const Case& c);
// "Case1: ...\n\nCase2: ..." for the S2RD {cases} slot.
std::string cases_block(const std::vector<Case>& cases);
// Trimmed texts joined by a blank line.
std::string join_fragments(const std::vector<std::string>& texts);

std::string vanilla_prompt(const TemplateSet& t, const std::string& role_name, const std::string& query);
std::string cot_prompt(const TemplateSet& t, const std::string& role_name, const std::string& query);
// Throws ConfigError unless exactly four cases are given.
std::string few_shot_prompt(const TemplateSet& t, const std::string& role_name, const std::vector<Case>& cases,
                            const std::string& query);
std::string rag_prompt(const TemplateSet& t, const std::string& role_name, const std::string& rag_information,
                       const std::string& query);
std::string rag_few_shot_prompt(const TemplateSet& t, const std::string& role_name,
                                const std::string& rag_information, const std::vector<Case>& cases,
                                const std::string& query);
std::string self_reflection_prompt(const TemplateSet& t, const std::string& role_name,
                                   const std::string& first_response, const std::string& query);

std::string s2rd_narrative_prompt(const TemplateSet& t, const std::string& role_name);
std::string s2rd_recollection_prompt(const TemplateSet& t, const std::string& role_name,
                                     const std::string& narrative, const std::string& query);
std::string s2rd_doubt_prompt(const TemplateSet& t, const std::string& role_name, const std::string& narrative,
                              const std::string& self_rag, const std::string& query);
std::string s2rd_query_prompt(const TemplateSet& t, const std::string& role_name, const std::string& narrative,
                              const std::string& self_rag, const std::string& cases, const std::string& doubt,
                              const std::string& query);

std::string judge_prompt(const TemplateSet& t, ErrorType type, const std::string& role_name,
                         const std::string& correct_memory, const std::string& query, const std::string& response);

}  // namespace rolecheck
