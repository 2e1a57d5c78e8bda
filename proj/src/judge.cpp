#include "rolecheck/judge.hpp"

#include <cmath>
#include <regex>
#include <set>

#include "rolecheck/errors.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

std::string to_string(JudgeVerdict v) {
  switch (v) {
    case JudgeVerdict::yes: return "yes";
    case JudgeVerdict::no: return "no";
    default: return "invalid";
  }
}

JudgeVerdict judge_verdict_from_string(const std::string& s) {
  if (s == "yes") return JudgeVerdict::yes;
  if (s == "no") return JudgeVerdict::no;
  if (s == "invalid") return JudgeVerdict::invalid;
  throw UsageError("unknown verdict '" + s + "'");
}

ParsedJudgment parse_judgment(const std::string& raw) {
  std::string t;
  for (char c : raw)
    if (c != '*') t += c;

  static const std::regex judgment_re(R"((?:^|\n)[ \t#>-]*judge?ment[ \t]*:\s*([A-Za-z]+))", std::regex::icase);
  static const std::regex explanation_re(R"((?:^|\n)[ \t#>-]*explanation[ \t]*:)", std::regex::icase);

  ParsedJudgment out;
  std::ptrdiff_t judgment_pos = -1;
  std::string word;
  for (auto it = std::sregex_iterator(t.begin(), t.end(), judgment_re); it != std::sregex_iterator(); ++it) {
    judgment_pos = it->position(0);
    word = text::to_lower((*it)[1].str());
  }
  if (judgment_pos >= 0) {
    if (word == "yes") out.verdict = JudgeVerdict::yes;
    else if (word == "no") out.verdict = JudgeVerdict::no;
  }

  std::smatch m;
  const std::string head = judgment_pos >= 0 ? t.substr(0, static_cast<std::size_t>(judgment_pos)) : t;
  if (std::regex_search(head, m, explanation_re)) {
    out.explanation = text::trim(head.substr(static_cast<std::size_t>(m.position(0) + m.length(0))));
  }
  out.missing_explanation = out.explanation.empty();
  return out;
}

nlohmann::json Judgment::to_json() const {
  nlohmann::json j{{"query_id", query_id},
                   {"trial_index", trial_index},
                   {"strategy", to_string(strategy)},
                   {"verdict", to_string(verdict)},
                   {"judge_explanation", judge_explanation},
                   {"raw_text", raw_text},
                   {"attempts", attempts}};
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

Judgment Judgment::from_json(const nlohmann::json& j) {
  Judgment g;
  g.query_id = j.at("query_id").get<std::string>();
  g.trial_index = j.at("trial_index").get<int>();
  g.strategy = strategy_from_string(j.value("strategy", "vanilla"));
  g.verdict = judge_verdict_from_string(j.at("verdict").get<std::string>());
  g.judge_explanation = j.value("judge_explanation", "");
  g.raw_text = j.value("raw_text", "");
  g.attempts = j.value("attempts", 0);
  g.warnings = j.value("warnings", std::vector<std::string>{});
  return g;
}

Judgment judge_record(const DetectionRecord& record, const DatasetRecord& entry, const std::string& role_name,
                      Provider& provider, const std::string& judge_endpoint, const TemplateSet& templates) {
  if (record.query_id != entry.query_id)
    throw IntegrityError("record '" + record.query_id + "' judged against entry '" + entry.query_id + "'");
  const auto prompt =
      judge_prompt(templates, entry.error_type, role_name, entry.source_memory, entry.query, record.response_text);
  Judgment g;
  g.query_id = record.query_id;
  g.trial_index = record.trial_index;
  g.strategy = record.strategy;
  const std::string trial_salt = "trial=" + std::to_string(record.trial_index);
  for (int attempt = 1; attempt <= 1 + kJudgeParseRetries; ++attempt) {
    const std::string salt = attempt == 1 ? trial_salt : trial_salt + ";attempt=" + std::to_string(attempt);
    auto ex = provider.chat(judge_endpoint, "", prompt, {salt, true});
    g.attempts = attempt;
    g.raw_text = ex.response_text;
    auto parsed = parse_judgment(ex.response_text);
    if (parsed.verdict) {
      g.verdict = *parsed.verdict;
      g.judge_explanation = parsed.explanation;
      if (parsed.missing_explanation) g.warnings.push_back("missing explanation");
      return g;
    }
  }
  g.verdict = JudgeVerdict::invalid;
  g.warnings.push_back("unparseable judgment after " + std::to_string(1 + kJudgeParseRetries) + " attempts");
  return g;
}

// ---------------------------------------------------------------- scoring

nlohmann::json ScoreCell::to_json() const {
  return {{"accuracy_mean", accuracy_mean},
          {"sem", sem},
          {"n", n},
          {"invalid", invalid},
          {"trial_accuracies", trial_accuracies}};
}

ScoreCell ScoreCell::from_json(const nlohmann::json& j) {
  ScoreCell c;
  c.accuracy_mean = j.at("accuracy_mean").get<double>();
  c.sem = j.at("sem").get<double>();
  c.n = j.at("n").get<int>();
  c.invalid = j.value("invalid", 0);
  c.trial_accuracies = j.value("trial_accuracies", std::vector<double>{});
  return c;
}

ScoreCell make_cell(const std::vector<std::pair<int, int>>& per_trial, int invalid) {
  ScoreCell c;
  c.invalid = invalid;
  if (per_trial.empty()) return c;
  c.n = per_trial.front().second;
  if (c.n == 0) return c;
  for (auto [correct, n] : per_trial) c.trial_accuracies.push_back(static_cast<double>(correct) / n);
  const double t = static_cast<double>(c.trial_accuracies.size());
  double sum = 0;
  for (double a : c.trial_accuracies) sum += a;
  c.accuracy_mean = sum / t;
  if (c.trial_accuracies.size() > 1) {
    double ss = 0;
    for (double a : c.trial_accuracies) ss += (a - c.accuracy_mean) * (a - c.accuracy_mean);
    c.sem = std::sqrt(ss / (t - 1)) / std::sqrt(t);
  }
  return c;
}

nlohmann::json ScoreTable::to_json() const {
  nlohmann::json j{{"run_id", run_id}, {"model", model}, {"strategy", strategy}, {"trials", trials}};
  for (const auto& [type, row] : cells) {
    for (const auto& [cat, cell] : row) j["cells"][to_string(type)][to_string(cat)] = cell.to_json();
  }
  for (const auto& [type, cell] : averages) j["averages"][to_string(type)] = cell.to_json();
  j["overall"] = overall.to_json();
  return j;
}

ScoreTable ScoreTable::from_json(const nlohmann::json& j) {
  ScoreTable s;
  s.run_id = j.value("run_id", "");
  s.model = j.value("model", "");
  s.strategy = j.value("strategy", "");
  s.trials = j.value("trials", 0);
  const auto cells = j.value("cells", nlohmann::json::object());
  const auto averages = j.value("averages", nlohmann::json::object());
  for (const auto& [type, row] : cells.items())
    for (const auto& [cat, cell] : row.items())
      s.cells[error_type_from_string(type)][category_from_string(cat)] = ScoreCell::from_json(cell);
  for (const auto& [type, cell] : averages.items())
    s.averages[error_type_from_string(type)] = ScoreCell::from_json(cell);
  s.overall = ScoreCell::from_json(j.at("overall"));
  return s;
}

ScoreTable score(const std::vector<Judgment>& judgments, const ProbingDataset& dataset, int trials) {
  if (trials < 1) throw UsageError("trials must be >= 1");
  if (dataset.records.empty()) throw EmptyDataset("cannot score an empty dataset");
  std::map<std::string, const DatasetRecord*> entries;
  for (const auto& r : dataset.records) entries[r.query_id] = &r;

  std::map<std::pair<std::string, int>, JudgeVerdict> seen;
  for (const auto& g : judgments) {
    if (!entries.count(g.query_id)) throw MissingTrial("judgment for unknown query '" + g.query_id + "'");
    if (g.trial_index < 0 || g.trial_index >= trials)
      throw MissingTrial("judgment for '" + g.query_id + "' has trial " + std::to_string(g.trial_index) +
                         " outside [0, " + std::to_string(trials) + ")");
    if (!seen.emplace(std::make_pair(g.query_id, g.trial_index), g.verdict).second)
      throw MissingTrial("duplicate judgment for ('" + g.query_id + "', " + std::to_string(g.trial_index) + ")");
  }
  for (const auto& r : dataset.records)
    for (int t = 0; t < trials; ++t)
      if (!seen.count({r.query_id, t}))
        throw MissingTrial("no judgment for ('" + r.query_id + "', " + std::to_string(t) + ")");

  // Integer tallies per group and trial; groups are cells, per-type and overall.
  struct Tally {
    std::vector<std::pair<int, int>> per_trial;
    int invalid = 0;
  };
  auto fresh = [&] { return Tally{std::vector<std::pair<int, int>>(static_cast<std::size_t>(trials)), 0}; };
  std::map<std::pair<ErrorType, MemoryCategory>, Tally> cell_tally;
  std::map<ErrorType, Tally> type_tally;
  Tally all = fresh();
  for (auto type : {ErrorType::kke, ErrorType::uke}) {
    type_tally[type] = fresh();
    for (auto cat : kAllCategories) cell_tally[{type, cat}] = fresh();
  }
  for (const auto& [key, verdict] : seen) {
    const auto& r = *entries.at(key.first);
    const auto t = static_cast<std::size_t>(key.second);
    const int correct = verdict == JudgeVerdict::yes ? 1 : 0;
    const int bad = verdict == JudgeVerdict::invalid ? 1 : 0;
    for (Tally* tl : {&cell_tally[{r.error_type, r.memory_category}], &type_tally[r.error_type], &all}) {
      tl->per_trial[t].first += correct;
      tl->per_trial[t].second += 1;
      tl->invalid += bad;
    }
  }

  ScoreTable s;
  s.trials = trials;
  for (const auto& [key, tl] : cell_tally) s.cells[key.first][key.second] = make_cell(tl.per_trial, tl.invalid);
  for (const auto& [type, tl] : type_tally) s.averages[type] = make_cell(tl.per_trial, tl.invalid);
  s.overall = make_cell(all.per_trial, all.invalid);
  return s;
}

}  // namespace rolecheck
