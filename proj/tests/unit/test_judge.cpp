#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rolecheck/errors.hpp"
#include "rolecheck/judge.hpp"
#include "rolecheck/templates.hpp"
#include "support.hpp"

using namespace rolecheck;

namespace {

ProbingDataset kke_dataset(int n, MemoryCategory c = MemoryCategory::event) {
  ProbingDataset ds;
  for (int i = 0; i < n; ++i) {
    DatasetRecord r;
    r.query_id = "q" + std::to_string(i);
    r.character_id = "x";
    r.memory_id = "m" + std::to_string(i);
    r.error_type = ErrorType::kke;
    r.memory_category = c;
    r.query = "Do you?";
    ds.records.push_back(r);
  }
  return ds;
}

Judgment judgment(const std::string& id, int trial, JudgeVerdict v) {
  Judgment g;
  g.query_id = id;
  g.trial_index = trial;
  g.verdict = v;
  return g;
}

}  // namespace

TEST(JudgeParser, ToleranceTable) {
  struct Row {
    const char* text;
    std::optional<JudgeVerdict> verdict;
    bool missing_explanation;
  };
  using V = JudgeVerdict;
  const Row rows[] = {
      {"explanation: corrected the tutor's name.\n\njudgment: yes", V::yes, false},
      {"JUDGMENT: No", V::no, true},
      {"Explanation: fine\n\nJudgement: Yes", V::yes, false},
      {"**Explanation:** spotted it\n\n**Judgment:** No", V::no, false},
      {"explanation: x\n\njudgment:yes.", V::yes, false},
      {"  - judgment : NO", V::no, true},
      {"### Judgment: yes", V::yes, true},
      {"explanation: first\n\njudgment: yes\n\njudgment: no", V::no, false},
      {"explanation: torn\n\njudgment: maybe", std::nullopt, false},
      {"My judgment: yes", std::nullopt, true},
      {"The response is good.", std::nullopt, true},
      {"", std::nullopt, true},
      {"asdf qwer zxcv", std::nullopt, true},
  };
  for (const auto& r : rows) {
    auto p = parse_judgment(r.text);
    EXPECT_EQ(p.verdict, r.verdict) << r.text;
    EXPECT_EQ(p.missing_explanation, r.missing_explanation) << r.text;
  }
  EXPECT_EQ(parse_judgment("explanation: corrected the tutor's name.\n\njudgment: yes").explanation,
            "corrected the tutor's name.");
}

TEST(JudgeRecord, RetriesThenInvalid) {
  rctest::MockRig rig;
  rig.chat("judge");
  rig.mock->on_chat(MatchKind::any, "", "gibberish");
  DetectionRecord rec;
  rec.query_id = "q0";
  rec.response_text = "No.";
  auto entry = kke_dataset(1).records[0];
  auto g = judge_record(rec, entry, "Ada", *rig.provider, "judge", TemplateSet::builtin());
  EXPECT_EQ(g.verdict, JudgeVerdict::invalid);
  EXPECT_EQ(g.attempts, 3);
  EXPECT_EQ(rig.mock->chat_calls(), 3u);
  // all three attempts sent the same prompt
  auto calls = rig.mock->calls();
  EXPECT_EQ(calls[0].texts, calls[2].texts);
}

TEST(JudgeRecord, RecoversOnRetryAndPicksTemplateByType) {
  rctest::MockRig rig;
  rig.chat("judge");
  rig.mock->on_chat(MatchKind::any, "",
                    std::vector<MockOutcome>{MockOutcome::reply("huh"), MockOutcome::reply("JUDGMENT: No")});
  DetectionRecord rec;
  rec.query_id = "q0";
  rec.response_text = "Yes.";
  auto entry = kke_dataset(1).records[0];
  entry.error_type = ErrorType::uke;
  auto g = judge_record(rec, entry, "Ada", *rig.provider, "judge", TemplateSet::builtin());
  EXPECT_EQ(g.verdict, JudgeVerdict::no);
  EXPECT_EQ(g.attempts, 2);
  EXPECT_EQ(g.warnings, (std::vector<std::string>{"missing explanation"}));
  EXPECT_NE(rig.mock->calls()[0].texts[0].find("shown confusion or curiosity"), std::string::npos);
}

TEST(Score, TwoNineteenOfFourNinetyFiveYes) {
  auto ds = kke_dataset(495);
  std::vector<Judgment> js;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 495; ++i) js.push_back(judgment("q" + std::to_string(i), t, i < 219 ? JudgeVerdict::yes : JudgeVerdict::no));
  auto s = score(js, ds, 3);
  EXPECT_NEAR(s.averages.at(ErrorType::kke).accuracy_mean, 219.0 / 495.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.averages.at(ErrorType::kke).sem, 0.0);
  EXPECT_EQ(s.averages.at(ErrorType::kke).n, 495);
}

TEST(Score, SemOfPointFivePointSixPointSeven) {
  auto c = make_cell({{5, 10}, {6, 10}, {7, 10}}, 0);
  EXPECT_NEAR(c.accuracy_mean, 0.6, 1e-12);
  EXPECT_NEAR(c.sem, 0.1 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(c.sem, 0.05774, 1e-5);
}

TEST(Score, AllYesIsPerfect) {
  auto ds = kke_dataset(8, MemoryCategory::identity);
  std::vector<Judgment> js;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 8; ++i) js.push_back(judgment("q" + std::to_string(i), t, JudgeVerdict::yes));
  auto s = score(js, ds);
  EXPECT_DOUBLE_EQ(s.cells.at(ErrorType::kke).at(MemoryCategory::identity).accuracy_mean, 1.0);
  EXPECT_DOUBLE_EQ(s.overall.accuracy_mean, 1.0);
  EXPECT_DOUBLE_EQ(s.overall.sem, 0.0);
}

TEST(Score, InvalidCountsAsWrongAndIsReported) {
  auto ds = kke_dataset(2);
  std::vector<Judgment> js = {judgment("q0", 0, JudgeVerdict::yes), judgment("q1", 0, JudgeVerdict::invalid)};
  auto s = score(js, ds, 1);
  EXPECT_DOUBLE_EQ(s.overall.accuracy_mean, 0.5);
  EXPECT_EQ(s.overall.invalid, 1);
}

TEST(Score, MissingDuplicateAndUnknownAreMissingTrial) {
  auto ds = kke_dataset(2);
  std::vector<Judgment> ok = {judgment("q0", 0, JudgeVerdict::yes), judgment("q1", 0, JudgeVerdict::no)};
  EXPECT_NO_THROW(score(ok, ds, 1));
  EXPECT_THROW(score({ok[0]}, ds, 1), MissingTrial);
  EXPECT_THROW(score({ok[0], ok[1], ok[1]}, ds, 1), MissingTrial);
  EXPECT_THROW(score({ok[0], ok[1], judgment("zz", 0, JudgeVerdict::yes)}, ds, 1), MissingTrial);
  EXPECT_THROW(score({ok[0], ok[1], judgment("q0", 1, JudgeVerdict::yes)}, ds, 1), MissingTrial);
}

TEST(Score, PermutationInvariantAndWeightedMeansReconstructAverages) {
  ProbingDataset ds;
  std::mt19937 rng(11);
  for (int i = 0; i < 60; ++i) {
    DatasetRecord r;
    r.query_id = "q" + std::to_string(i);
    r.error_type = i % 2 ? ErrorType::uke : ErrorType::kke;
    r.memory_category = kAllCategories[(i / 2) % 4];
    ds.records.push_back(r);
  }
  std::vector<Judgment> js;
  for (int t = 0; t < 3; ++t)
    for (const auto& r : ds.records) js.push_back(judgment(r.query_id, t, rng() % 3 ? JudgeVerdict::yes : JudgeVerdict::no));
  auto a = score(js, ds);
  std::shuffle(js.begin(), js.end(), rng);
  EXPECT_EQ(score(js, ds).to_json(), a.to_json());
  for (auto t : {ErrorType::kke, ErrorType::uke}) {
    double weighted = 0;
    int n = 0;
    for (const auto& [c, cell] : a.cells.at(t)) {
      weighted += cell.accuracy_mean * cell.n;
      n += cell.n;
    }
    EXPECT_NEAR(weighted / n, a.averages.at(t).accuracy_mean, 1e-9);
  }
}

TEST(Score, TableJsonRoundTrip) {
  auto ds = kke_dataset(3);
  std::vector<Judgment> js;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 3; ++i) js.push_back(judgment("q" + std::to_string(i), t, (i + t) % 2 ? JudgeVerdict::yes : JudgeVerdict::no));
  auto s = score(js, ds);
  s.run_id = "r";
  s.model = "m";
  s.strategy = "vanilla";
  EXPECT_EQ(ScoreTable::from_json(s.to_json()).to_json(), s.to_json());
}
