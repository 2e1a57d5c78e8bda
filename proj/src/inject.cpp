#include "rolecheck/inject.hpp"

#include <random>
#include <set>
#include <sstream>

#include "rolecheck/embedded_assets.hpp"
#include "rolecheck/errors.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/templates.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

std::string to_string(ErrorType t) { return t == ErrorType::kke ? "kke" : "uke"; }

ErrorType error_type_from_string(const std::string& s) {
  std::string l = text::to_lower(s);
  if (l == "kke") return ErrorType::kke;
  if (l == "uke") return ErrorType::uke;
  throw ParseFailure("unknown error type '" + s + "'");
}

// ---------------------------------------------------------------- registry

SubDisciplineRegistry::SubDisciplineRegistry(std::vector<std::string> terms) : terms_(std::move(terms)) {
  std::set<std::string> seen;
  for (const auto& t : terms_) {
    if (text::is_blank(t)) throw ConfigError("registry contains a blank term");
    if (!seen.insert(t).second) throw ConfigError("registry term '" + t + "' is duplicated");
  }
}

namespace {
std::vector<std::string> registry_lines(std::string_view body) {
  std::vector<std::string> terms;
  std::istringstream in{std::string(body)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (!t.empty()) terms.push_back(t);
  }
  return terms;
}
}  // namespace

SubDisciplineRegistry SubDisciplineRegistry::builtin() {
  return SubDisciplineRegistry(registry_lines(assets::builtin_registry()));
}

SubDisciplineRegistry SubDisciplineRegistry::load(const std::string& path) {
  return SubDisciplineRegistry(registry_lines(text::read_file(path)));
}

bool SubDisciplineRegistry::contains(const std::string& term) const {
  return std::find(terms_.begin(), terms_.end(), term) != terms_.end();
}

// ---------------------------------------------------------------- queries

nlohmann::json ErrorQuery::to_json() const {
  return {{"query_id", query_id},
          {"memory_id", memory_id},
          {"error_type", to_string(error_type)},
          {"query_text", query_text},
          {"false_memory", false_memory},
          {"explanation", explanation},
          {"topics", topics},
          {"screening_status", to_string(screening_status)},
          {"review_flag", review_flag}};
}

ErrorQuery ErrorQuery::from_json(const nlohmann::json& j) {
  ErrorQuery q;
  q.query_id = j.at("query_id").get<std::string>();
  q.memory_id = j.at("memory_id").get<std::string>();
  q.error_type = error_type_from_string(j.at("error_type").get<std::string>());
  q.query_text = j.value("query_text", "");
  q.false_memory = j.at("false_memory").get<std::string>();
  q.explanation = j.value("explanation", "");
  q.topics = j.value("topics", std::vector<std::string>{});
  q.screening_status = screening_status_from_string(j.value("screening_status", "pending"));
  q.review_flag = j.value("review_flag", false);
  return q;
}

std::string query_id_for(const std::string& memory_id, ErrorType type) {
  return memory_id + "-" + to_string(type);
}

Injection parse_injection(const std::string& response) {
  std::string lower = text::to_lower(response);
  auto e = lower.find("[explanation]");
  auto m = lower.find("[manipulate]");
  if (e == std::string::npos || m == std::string::npos || m < e) {
    throw ParseFailure(std::string("injection reply lacks ") +
                       (e == std::string::npos ? "[explanation]" : "[manipulate]") + " marker");
  }
  Injection out;
  out.explanation = text::trim(response.substr(e + 13, m - e - 13));
  out.false_memory = text::collapse_whitespace(response.substr(m + 12));
  if (out.false_memory.empty()) throw ParseFailure("injection reply has an empty [manipulate] section");
  return out;
}

namespace {
std::string category_block(const TemplateSet& templates, const std::string& prefix, MemoryCategory c,
                           const std::string& role_name) {
  return templates.get(prefix + "_category_" + to_string(c)).render({{"role_name", role_name}});
}
}  // namespace

std::string kke_prompt(const TemplateSet& templates, const Memory& memory, const std::string& role_name) {
  return templates.get("kke_injection")
      .render({{"role_name", role_name},
               {"memory_category", category_label(memory.category)},
               {"correct_memory", memory.text},
               {"memory_explanation", category_block(templates, "kke", memory.category, role_name)}});
}

std::string uke_prompt(const TemplateSet& templates, const Memory& memory, const std::string& role_name,
                       const std::string& topic1, const std::string& topic2) {
  return templates.get("uke_injection")
      .render({{"role_name", role_name},
               {"memory_category", category_label(memory.category)},
               {"correct_memory", memory.text},
               {"memory_explanation", category_block(templates, "uke", memory.category, role_name)},
               {"topic1", topic1},
               {"topic2", topic2}});
}

std::string question_prompt(const TemplateSet& templates, const std::string& false_memory,
                            const std::string& role_name) {
  return templates.get("question_transform").render({{"role_name", role_name}, {"manipulate_memory", false_memory}});
}

Injection inject_kke(const Memory& memory, const std::string& role_name, Provider& provider,
                     const std::string& endpoint_id, const TemplateSet& templates) {
  auto exchange = provider.chat(endpoint_id, "", kke_prompt(templates, memory, role_name));
  return parse_injection(exchange.response_text);
}

std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& memory_id) {
  return text::sha256_u64(std::to_string(run_seed) + ":" + memory_id);
}

std::array<std::string, 2> sample_topics(const SubDisciplineRegistry& registry, std::uint64_t seed) {
  const std::size_t n = registry.count();
  if (n < 2) throw RegistryTooSmall("registry has " + std::to_string(n) + " terms; 2 are required");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  std::size_t i = first(rng);
  std::size_t j = second(rng);
  if (j >= i) ++j;
  return {registry.terms()[i], registry.terms()[j]};
}

Injection inject_uke(const Memory& memory, const std::string& role_name, const SubDisciplineRegistry& registry,
                     std::uint64_t seed, Provider& provider, const std::string& endpoint_id,
                     const TemplateSet& templates) {
  auto topics = sample_topics(registry, seed);
  auto exchange = provider.chat(endpoint_id, "", uke_prompt(templates, memory, role_name, topics[0], topics[1]));
  Injection out = parse_injection(exchange.response_text);
  out.topics = {topics[0], topics[1]};
  return out;
}

void validate_question(const std::string& question, const std::vector<std::string>& interrogatives) {
  std::string q = text::trim(question);
  if (q.empty()) throw ValidationFailure("empty", "question is empty");
  auto tokens = text::words(q);
  std::string first = tokens.front();
  while (!first.empty() && !std::isalpha(static_cast<unsigned char>(first.back()))) first.pop_back();
  if (std::find(interrogatives.begin(), interrogatives.end(), first) == interrogatives.end())
    throw ValidationFailure("not_interrogative", "question must begin with an interrogative word: " + q);
  bool second_person = false;
  for (const auto& t : tokens) {
    std::string w;
    for (unsigned char c : t)
      if (std::isalpha(c) || c == '\'') w += static_cast<char>(std::tolower(c));
    if (w == "you" || w == "your" || w == "yours" || w == "yourself" || w.starts_with("you'")) {
      second_person = true;
      break;
    }
  }
  if (!second_person) throw ValidationFailure("not_second_person", "question is not in the second person: " + q);
  if (q.back() != '?') throw ValidationFailure("missing_terminator", "question does not end with '?': " + q);
  if (std::count(q.begin(), q.end(), '?') > 1)
    throw ValidationFailure("multiple_questions", "expected a single question: " + q);
}

std::string to_question(const std::string& false_memory, const std::string& role_name, Provider& provider,
                        const std::string& endpoint_id, const TemplateSet& templates,
                        const std::vector<std::string>& interrogatives) {
  if (text::is_blank(false_memory)) throw UsageError("to_question: false_memory is empty");
  auto exchange = provider.chat(endpoint_id, "", question_prompt(templates, false_memory, role_name));
  std::string q = text::collapse_whitespace(exchange.response_text);
  validate_question(q, interrogatives);
  return q;
}

int edit_region_count(const std::string& a, const std::string& b) {
  auto wa = text::words(a);
  auto wb = text::words(b);
  const std::size_t n = wa.size();
  const std::size_t m = wb.size();
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[i][j] = wa[i] == wb[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  // Walk the alignment and count maximal runs of non-matching steps.
  int regions = 0;
  bool in_edit = false;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n || j < m) {
    if (i < n && j < m && wa[i] == wb[j]) {
      in_edit = false;
      ++i;
      ++j;
      continue;
    }
    if (!in_edit) ++regions;
    in_edit = true;
    if (j >= m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1])) ++i;
    else ++j;
  }
  return regions;
}

PairGateResult pair_gate(ScreeningStatus kke_status, ScreeningStatus uke_status) {
  if (kke_status == ScreeningStatus::pending || uke_status == ScreeningStatus::pending)
    throw UsageError("pair_gate requires final verdicts for both queries");
  if (kke_status == ScreeningStatus::kept && uke_status == ScreeningStatus::kept)
    return {ScreeningStatus::kept, ScreeningStatus::kept};
  return {ScreeningStatus::rejected, ScreeningStatus::rejected};
}

}  // namespace rolecheck
