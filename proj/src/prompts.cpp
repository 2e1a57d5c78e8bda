#include "rolecheck/prompts.hpp"

#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

std::string serialize_case(const Case& c) { return "Question: " + c.query + "\nResponse: " + c.response; }

std::string cases_block(const std::vector<Case>& cases) {
  std::string out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (i) out += "\n\n";
    out += "Case" + std::to_string(i + 1) + ": " + serialize_case(cases[i]);
  }
  return out;
}

std::string join_fragments(const std::vector<std::string>& texts) {
  std::string out;
  for (const auto& t : texts) {
    if (!out.empty()) out += "\n\n";
    out += text::trim(t);
  }
  return out;
}

namespace {
void bind_cases(Bindings& b, const std::vector<Case>& cases) {
  if (cases.size() != 4)
    throw ConfigError("few-shot prompts need exactly 4 cases, got " + std::to_string(cases.size()));
  for (std::size_t i = 0; i < 4; ++i) b["case" + std::to_string(i + 1)] = serialize_case(cases[i]);
}
}  // namespace

std::string vanilla_prompt(const TemplateSet& t, const std::string& role_name, const std::string& query) {
  return t.get("vanilla").render({{"role_name", role_name}, {"given_query", query}});
}

std::string cot_prompt(const TemplateSet& t, const std::string& role_name, const std::string& query) {
  return t.get("cot").render({{"role_name", role_name}, {"given_query", query}});
}

std::string few_shot_prompt(const TemplateSet& t, const std::string& role_name, const std::vector<Case>& cases,
                            const std::string& query) {
  Bindings b{{"role_name", role_name}, {"given_query", query}};
  bind_cases(b, cases);
  return t.get("few_shot").render(b);
}

std::string rag_prompt(const TemplateSet& t, const std::string& role_name, const std::string& rag_information,
                       const std::string& query) {
  return t.get("rag").render({{"role_name", role_name}, {"rag_information", rag_information}, {"given_query", query}});
}

std::string rag_few_shot_prompt(const TemplateSet& t, const std::string& role_name,
                                const std::string& rag_information, const std::vector<Case>& cases,
                                const std::string& query) {
  Bindings b{{"role_name", role_name}, {"rag_information", rag_information}, {"given_query", query}};
  bind_cases(b, cases);
  return t.get("rag_few_shot").render(b);
}

std::string self_reflection_prompt(const TemplateSet& t, const std::string& role_name,
                                   const std::string& first_response, const std::string& query) {
  return t.get("self_reflection")
      .render({{"role_name", role_name}, {"self_response", first_response}, {"given_query", query}});
}

std::string s2rd_narrative_prompt(const TemplateSet& t, const std::string& role_name) {
  return t.get("s2rd_narrative").render({{"role_name", role_name}});
}

std::string s2rd_recollection_prompt(const TemplateSet& t, const std::string& role_name,
                                     const std::string& narrative, const std::string& query) {
  return t.get("s2rd_recollection")
      .render({{"role_name", role_name}, {"self_narrative", narrative}, {"given_query", query}});
}

std::string s2rd_doubt_prompt(const TemplateSet& t, const std::string& role_name, const std::string& narrative,
                              const std::string& self_rag, const std::string& query) {
  return t.get("s2rd_doubt").render(
      {{"role_name", role_name}, {"self_narrative", narrative}, {"self_rag", self_rag}, {"given_query", query}});
}

std::string s2rd_query_prompt(const TemplateSet& t, const std::string& role_name, const std::string& narrative,
                              const std::string& self_rag, const std::string& cases, const std::string& doubt,
                              const std::string& query) {
  return t.get("s2rd_query").render({{"role_name", role_name},
                                     {"self_narrative", narrative},
                                     {"self_rag", self_rag},
                                     {"cases", cases},
                                     {"self_doubt", doubt},
                                     {"given_query", query}});
}

std::string judge_prompt(const TemplateSet& t, ErrorType type, const std::string& role_name,
                         const std::string& correct_memory, const std::string& query, const std::string& response) {
  return t.get(type == ErrorType::kke ? "judge_kke" : "judge_uke")
      .render({{"role_name", role_name},
               {"correct_memory", correct_memory},
               {"given_query", query},
               {"given_response", response}});
}

}  // namespace rolecheck
