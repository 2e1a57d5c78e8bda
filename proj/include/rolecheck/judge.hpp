#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/dataset.hpp"
#include "rolecheck/strategies.hpp"

namespace rolecheck {

class Provider;

enum class JudgeVerdict { yes, no, invalid };
std::string to_string(JudgeVerdict v);
JudgeVerdict judge_verdict_from_string(const std::string& s);

struct ParsedJudgment {
  std::optional<JudgeVerdict> verdict;  // empty when no judgment line parses
  std::string explanation;
  bool missing_explanation = false;
};

// Reads "explanation: ...\n\njudgment: yes|no". Labels are matched
// case-insensitively, "judgement" is accepted, markdown emphasis is
// ignored and the last judgment line wins.
ParsedJudgment parse_judgment(const std::string& text);

struct Judgment {
  std::string query_id;
  int trial_index = 0;
  StrategyKind strategy = StrategyKind::vanilla;
  JudgeVerdict verdict = JudgeVerdict::invalid;
  std::string judge_explanation;
  std::string raw_text;
  int attempts = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static Judgment from_json(const nlohmann::json& j);
};

inline constexpr int kJudgeParseRetries = 2;

// Judges one response. Unparseable replies are retried kJudgeParseRetries
// times with the same prompt; after that the verdict is invalid.
Judgment judge_record(const DetectionRecord& record, const DatasetRecord& entry, const std::string& role_name,
                      Provider& provider, const std::string& judge_endpoint, const TemplateSet& templates);

struct ScoreCell {
  double accuracy_mean = 0.0;
  double sem = 0.0;
  int n = 0;        // items per trial
  int invalid = 0;  // invalid verdicts over all trials
  std::vector<double> trial_accuracies;

  nlohmann::json to_json() const;
  static ScoreCell from_json(const nlohmann::json& j);
};

struct ScoreTable {
  std::string run_id;
  std::string model;
  std::string strategy;
  int trials = 0;
  std::map<ErrorType, std::map<MemoryCategory, ScoreCell>> cells;
  std::map<ErrorType, ScoreCell> averages;  // all items of the error type
  ScoreCell overall;                        // all items

  nlohmann::json to_json() const;
  static ScoreTable from_json(const nlohmann::json& j);
};

// Builds a cell from per-trial (correct, n) counts.
ScoreCell make_cell(const std::vector<std::pair<int, int>>& per_trial, int invalid);

// Every dataset query must have exactly one judgment per trial index in
// [0, trials); anything else throws MissingTrial. Invalid counts as wrong.
ScoreTable score(const std::vector<Judgment>& judgments, const ProbingDataset& dataset, int trials = 3);

}  // namespace rolecheck
