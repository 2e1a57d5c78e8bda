// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails or overruns its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "builders.hpp"
#include "e2e_pipeline.hpp"
#include "golden_compose.hpp"
#include "rolecheck/config.hpp"
#include "rolecheck/errors.hpp"
#include "rolecheck/judge.hpp"
#include "rolecheck/mock_backend.hpp"
#include "rolecheck/pipeline.hpp"
#include "rolecheck/report.hpp"
#include "rolecheck/retrieval.hpp"
#include "rolecheck/strategies.hpp"
#include "rolecheck/templates.hpp"
#include "support.hpp"

using namespace rolecheck;

namespace {

struct Skip {
  std::string why;
};

// Collects failed checks; the criterion passes when none are recorded.
struct Checker {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    else if (!ok) failures.push_back("");
  }
};

std::string random_text(std::mt19937& rng, int max_words) {
  static const char* words[] = {"harbor", "{", "}", "lamp",  "Ghent", "{x}", "ésprit", "\"quoted\"", "$1",
                                "\n",     "  ", "snow", "1893", "tutor", "{role_name}", "a\\b", "\u2014", "tab\t"};
  std::uniform_int_distribution<int> n(1, max_words), w(0, static_cast<int>(std::size(words)) - 1);
  std::string out;
  for (int i = n(rng); i > 0; --i) out += std::string(words[w(rng)]) + (i > 1 ? " " : "");
  return out;
}

// ---------------------------------------------------------------- templates

void golden_suite(Checker& c) {
  const auto templates = TemplateSet::builtin();
  const auto inputs = rctest::load_golden_inputs();
  const auto composed = rctest::compose_all(templates, inputs);
  c.expect(composed.size() == 22, "expected 22 golden compositions");
  for (const auto& [name, text] : composed) {
    c.expect(text == rctest::golden(name), "golden mismatch: " + name);
    c.expect(!has_unfilled_placeholder(text), "unfilled placeholder in golden " + name);
  }

  // Values containing brace text are inserted verbatim, so the check is on
  // what the template itself left behind: each fuzzed value is replaced by a
  // brace-free marker before scanning.
  std::mt19937 rng(7);
  for (int i = 0; i < 1000; ++i) {
    rctest::GoldenInputs g = inputs;
    std::vector<std::string*> fields = {&g.role_name, &g.memory_chunk, &g.correct_memory, &g.false_memory,
                                       &g.topic1,    &g.topic2,       &g.query,          &g.response,
                                       &g.first_response, &g.narrative, &g.doubt};
    for (auto* f : fields) *f = random_text(rng, 12);
    for (auto& r : g.rag) r = random_text(rng, 8);
    for (auto& cs : g.cases) {
      cs.query = random_text(rng, 6);
      cs.response = random_text(rng, 6);
    }
    auto fuzzed = rctest::compose_all(templates, g);
    // Recompose with brace-free values at the same positions.
    rctest::GoldenInputs plain = g;
    int k = 0;
    for (auto* f : {&plain.role_name, &plain.memory_chunk, &plain.correct_memory, &plain.false_memory, &plain.topic1,
                    &plain.topic2, &plain.query, &plain.response, &plain.first_response, &plain.narrative, &plain.doubt})
      *f = "V" + std::to_string(k++);
    for (auto& r : plain.rag) r = "R" + std::to_string(k++);
    for (auto& cs : plain.cases) {
      cs.query = "Q" + std::to_string(k++);
      cs.response = "A" + std::to_string(k++);
    }
    for (const auto& [name, text] : rctest::compose_all(templates, plain))
      c.expect(!has_unfilled_placeholder(text), "unfilled placeholder in fuzzed " + name);
    for (const auto& [name, text] : fuzzed)
      c.expect(text.find(g.query) != std::string::npos || name.find("injection") != std::string::npos ||
                   name == "memory_generation" || name == "question_transform" || name == "s2rd_narrative",
               "fuzzed query not verbatim in " + name);
  }
}

// ---------------------------------------------------------------- determinism

void determinism(Checker& c) {
  const std::vector<std::string> strategies = {"vanilla", "cot", "few_shot", "self_reflection", "rag", "rag_few_shot",
                                               "s2rd"};
  rctest::TempDir a, b;
  rctest::run_full_pipeline(a.path(), strategies, 3, 4);
  rctest::run_full_pipeline(b.path(), strategies, 3, 1);
  auto same = [&](const std::string& rel) {
    auto x = text::read_file((a.path() / rel).string());
    c.expect(!x.empty(), rel + " is empty");
    c.expect(x == text::read_file((b.path() / rel).string()), rel + " differs between runs");
  };
  same("work/dataset.jsonl");
  auto ds = load((a.path() / "work/dataset.jsonl").string());
  std::set<std::string> characters;
  std::set<std::string> memories;
  for (const auto& r : ds.records) {
    characters.insert(r.character_id);
    memories.insert(r.memory_id);
  }
  c.expect(characters.size() == 2, "expected 2 characters in the dataset");
  c.expect(load_memories(Workspace(a.path() / "work")).size() == 20, "expected 2 x 10 generated memories");
  for (const auto& s : strategies) {
    same("runs/" + s + "-responder/responses.jsonl");
    same("runs/" + s + "-responder/judgments.jsonl");
  }
}

// ---------------------------------------------------------------- retrieval

void retrieval_oracle(Checker& c) {
  std::mt19937 rng(2024);
  for (int inst = 0; inst < 200; ++inst) {
    const int dim = std::uniform_int_distribution<int>(1, 16)(rng);
    const int docs = std::uniform_int_distribution<int>(1, 50)(rng);
    // Small integer components make exact ties common; some rows are
    // duplicated outright.
    std::uniform_int_distribution<int> comp(-2, 2);
    auto random_vec = [&] {
      std::vector<double> v(static_cast<std::size_t>(dim));
      do {
        for (auto& x : v) x = comp(rng);
      } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }));
      return v;
    };
    std::vector<int> order(static_cast<std::size_t>(docs));
    for (int i = 0; i < docs; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (int i = 0; i < docs; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "d%03d", order[static_cast<std::size_t>(i)]);
      auto v = (i > 0 && rng() % 4 == 0) ? rows[rng() % rows.size()].second : random_vec();
      rows.emplace_back(id, v);
    }
    const auto q = random_vec();
    const int k = std::uniform_int_distribution<int>(1, 60)(rng);

    // brute force
    std::vector<std::pair<double, std::string>> all;
    for (const auto& [id, v] : rows) {
      double d = 0, nq = 0, nv = 0;
      for (int i = 0; i < dim; ++i) {
        d += q[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        nq += q[static_cast<std::size_t>(i)] * q[static_cast<std::size_t>(i)];
        nv += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
      }
      double s = d / (std::sqrt(nq) * std::sqrt(nv));
      all.emplace_back(std::min(1.0, std::max(-1.0, s)), id);
    }
    std::sort(all.begin(), all.end(),
              [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(k)));

    CorpusIndex index("c", rows);
    auto hits = index.search_vector(q, k);
    bool ok = hits.size() == all.size();
    for (std::size_t i = 0; ok && i < hits.size(); ++i)
      ok = hits[i].chunk_id == all[i].second && hits[i].score == all[i].first;
    c.expect(ok, "ranking differs from brute force on instance " + std::to_string(inst));
  }
}

// ---------------------------------------------------------------- scoring

void scoring_oracle(Checker& c) {
  std::mt19937 rng(99);
  for (int set = 0; set < 100; ++set) {
    ProbingDataset ds;
    const int memories = std::uniform_int_distribution<int>(1, 40)(rng);
    const int trials = std::uniform_int_distribution<int>(1, 5)(rng);
    for (int m = 0; m < memories; ++m)
      for (auto t : {ErrorType::kke, ErrorType::uke}) {
        DatasetRecord r;
        r.memory_id = "m" + std::to_string(m);
        r.error_type = t;
        r.query_id = query_id_for(r.memory_id, t);
        r.memory_category = kAllCategories[rng() % 4];
        ds.records.push_back(r);
      }
    std::vector<Judgment> js;
    for (int t = 0; t < trials; ++t)
      for (const auto& r : ds.records) {
        Judgment g;
        g.query_id = r.query_id;
        g.trial_index = t;
        int roll = static_cast<int>(rng() % 10);
        g.verdict = roll < 5 ? JudgeVerdict::yes : roll < 9 ? JudgeVerdict::no : JudgeVerdict::invalid;
        js.push_back(g);
      }
    std::shuffle(js.begin(), js.end(), rng);
    auto table = score(js, ds, trials);

    // recount: per (type, category) and per type, per trial
    std::map<std::string, std::vector<std::pair<int, int>>> tally;  // key -> per trial (yes, n)
    std::map<std::string, int> invalid;
    std::map<std::string, const DatasetRecord*> by_id;
    for (const auto& r : ds.records) by_id[r.query_id] = &r;
    for (const auto& g : js) {
      const auto& r = *by_id.at(g.query_id);
      for (const std::string key : {to_string(r.error_type) + "/" + to_string(r.memory_category), to_string(r.error_type),
                                    std::string("overall")}) {
        auto& per = tally[key];
        per.resize(static_cast<std::size_t>(trials));
        per[static_cast<std::size_t>(g.trial_index)].second++;
        if (g.verdict == JudgeVerdict::yes) per[static_cast<std::size_t>(g.trial_index)].first++;
        if (g.verdict == JudgeVerdict::invalid) invalid[key]++;
      }
    }
    std::size_t expected = 0;
    for (const auto& [key, per] : tally) expected += key.find('/') != std::string::npos;
    auto check = [&](const std::string& key, const ScoreCell& cell) {
      const auto& per = tally[key];
      if (per.empty()) {
        c.expect(cell.n == 0 && cell.accuracy_mean == 0.0, key + " has no items but a non-empty cell");
        return;
      }
      double sum = 0, sq = 0;
      for (auto [y, n] : per) {
        double a = static_cast<double>(y) / n;
        sum += a;
        sq += a * a;
      }
      const double T = trials;
      const double mean = sum / T;
      const double var = T > 1 ? std::max(0.0, (sq - T * mean * mean) / (T - 1)) : 0.0;
      c.expect(std::abs(cell.accuracy_mean - mean) < 1e-12, key + " mean differs from recount");
      c.expect(std::abs(cell.sem - std::sqrt(var / T)) < 1e-9, key + " sem differs from recount");
      c.expect(cell.n == per[0].second, key + " n differs");
      c.expect(cell.invalid == invalid[key], key + " invalid count differs");
    };
    for (const auto& [type, row] : table.cells)
      for (const auto& [cat, cell] : row) check(to_string(type) + "/" + to_string(cat), cell);
    for (const auto& [type, cell] : table.averages) check(to_string(type), cell);
    check("overall", table.overall);
    std::size_t cells = 0;
    for (const auto& [type, row] : table.cells)
      for (const auto& [cat, cell] : row) cells += cell.n > 0;
    c.expect(cells == expected, "cell count differs from recount");
  }

  ProbingDataset ds;
  std::vector<Judgment> js;
  for (int i = 0; i < 495; ++i) {
    DatasetRecord r;
    r.query_id = "q" + std::to_string(i);
    r.error_type = ErrorType::kke;
    r.memory_category = kAllCategories[i % 4];
    ds.records.push_back(r);
  }
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 495; ++i) {
      Judgment g;
      g.query_id = "q" + std::to_string(i);
      g.trial_index = t;
      g.verdict = (i * 7) % 495 < 219 ? JudgeVerdict::yes : JudgeVerdict::no;
      js.push_back(g);
    }
  auto avg = score(js, ds, 3).averages.at(ErrorType::kke);
  c.expect(format_cell(avg) == "44.24±0.00", "219/495 renders as " + format_cell(avg));
  auto sem = make_cell({{5, 10}, {6, 10}, {7, 10}}, 0).sem;
  c.expect(std::abs(sem - 0.05774) <= 1e-5, "SEM of {0.5,0.6,0.7} is " + std::to_string(sem));
}

// ---------------------------------------------------------------- dataset

void check_invariants(Checker& c, const ProbingDataset& ds, const std::string& label) {
  std::map<std::string, std::map<ErrorType, int>> per_memory;
  std::map<ErrorType, std::map<MemoryCategory, int>> per_category;
  std::set<std::string> ids;
  for (const auto& r : ds.records) {
    per_memory[r.memory_id][r.error_type]++;
    per_category[r.error_type][r.memory_category]++;
    c.expect(ids.insert(r.query_id).second, label + ": duplicate query id " + r.query_id);
    c.expect(ds.character(r.character_id) != nullptr, label + ": unresolved character " + r.character_id);
  }
  for (const auto& [m, types] : per_memory)
    c.expect(types.size() == 2 && types.at(ErrorType::kke) == 1 && types.at(ErrorType::uke) == 1,
             label + ": memory " + m + " lacks exactly one kke and one uke");
  c.expect(per_category[ErrorType::kke] == per_category[ErrorType::uke], label + ": per-category counts differ");
  try {
    validate(ds);
  } catch (const Error& e) {
    c.expect(false, label + ": validate threw " + std::string(e.what()));
  }
}

void dataset_invariants(Checker& c) {
  using S = ScreeningStatus;
  struct Row {
    S kke, uke;
    bool kept;
  };
  const Row gate[] = {{S::kept, S::kept, true},      {S::kept, S::rejected, false}, {S::rejected, S::kept, false},
                      {S::rejected, S::rejected, false}};
  for (const auto& g : gate) {
    auto r = pair_gate(g.kke, g.uke);
    c.expect(r.kept() == g.kept, "pair_gate(" + to_string(g.kke) + "," + to_string(g.uke) + ")");
    if (!g.kept)
      c.expect(r.kke != S::kept && r.uke != S::kept, "a discarded pair must reject both queries");
  }

  for (auto [k, u] : {std::pair{S::pending, S::kept}, std::pair{S::kept, S::pending}}) {
    bool threw = false;
    try {
      pair_gate(k, u);
    } catch (const Error&) {
      threw = true;
    }
    c.expect(threw, "pair_gate accepted a pending verdict");
  }

  // the same fixture through assembly: only the keep/keep memory survives
  auto in = rctest::synthetic_input(1, 2, 4);
  for (auto& q : in.queries) {
    const auto m = q.memory_id.back() - '0';
    const Row& g = gate[m % 4];
    q.screening_status = q.error_type == ErrorType::kke ? g.kke : g.uke;
  }
  auto ds = assemble(in);
  c.expect(ds.records.size() == 2 && ds.records[0].memory_id == in.memories[0].memory_id,
           "assembly keeps only the keep/keep memory");

  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    int chars = 1 + static_cast<int>(rng() % 3), chunks = 1 + static_cast<int>(rng() % 4),
        mems = 1 + static_cast<int>(rng() % 9);
    auto base = rctest::synthetic_input(chars, chunks, mems);
    std::vector<std::string> rejected;
    for (const auto& q : base.queries)
      if (rng() % 5 == 0) rejected.push_back(q.query_id);
    auto fuzzed = rctest::synthetic_input(chars, chunks, mems, rejected);
    auto d = assemble(fuzzed);
    check_invariants(c, d, "fuzz " + std::to_string(i));
    std::set<std::string> rejected_memories;
    for (const auto& q : fuzzed.queries)
      if (q.screening_status != S::kept) rejected_memories.insert(q.memory_id);
    for (const auto& r : d.records)
      c.expect(!rejected_memories.count(r.memory_id), "memory with a rejected query survived");
    c.expect(d.records.size() == 2 * (fuzzed.memories.size() - rejected_memories.size()),
             "every fully kept memory contributes two records");
  }

  // a finalized dataset produced by the CLI
  rctest::TempDir dir;
  rctest::run_full_pipeline(dir.path(), {});
  check_invariants(c, load((dir.path() / "work/dataset.jsonl").string()), "e2e");
}

// ---------------------------------------------------------------- s2rd

std::vector<Case> four_cases() {
  return {{"Did you sail to Lima?", "No, to Valparaiso.", ErrorType::kke},
          {"Were you born in May?", "No, in June.", ErrorType::kke},
          {"Do you own a smartphone?", "A what?", ErrorType::uke},
          {"Did you fly a drone?", "I do not know that word.", ErrorType::uke}};
}

void s2rd_protocol(Checker& c) {
  std::mt19937 rng(17);
  const auto templates = TemplateSet::builtin();
  for (int run = 0; run < 50; ++run) {
    rctest::MockRig mock;
    mock.chat("resp").embed("emb");
    auto& m = *mock.mock;
    const std::string recollection = "I " + random_text(rng, 6) + ".\n\n<memory 2> I " + random_text(rng, 6) +
                                     ".\n\nI " + random_text(rng, 6) + ".";
    m.on_chat(MatchKind::contains, "Your self-narrative:", "I am " + random_text(rng, 5));
    m.on_chat(MatchKind::contains, "state three relevant true memories", recollection);
    m.on_chat(MatchKind::contains, "express your inner doubts", "Doubt: " + random_text(rng, 5));
    m.on_chat(MatchKind::any, "", "Final: " + random_text(rng, 5));
    m.on_embed_hashed(MatchKind::any, "", 4 + static_cast<int>(rng() % 13));

    const int chars = 1 + static_cast<int>(rng() % 3);
    auto in = rctest::synthetic_input(chars, 1 + static_cast<int>(rng() % 8), 1 + static_cast<int>(rng() % 6));
    auto ds = assemble(in);
    std::map<std::string, CharacterContext> contexts;
    for (const auto& p : in.profiles) {
      CharacterContext ctx;
      ctx.profile = p;
      std::vector<Chunk> own;
      for (const auto& ch : in.chunks)
        if (ch.character_id == p.character_id) {
          own.push_back(ch);
          ctx.chunk_text[ch.chunk_id] = ch.text;
        }
      ctx.index = build_index(p.character_id, own, *mock.provider, "emb");
      contexts[p.character_id] = std::move(ctx);
    }
    NarrativeCache narratives;
    StrategyRunner runner(*mock.provider, templates, contexts, CaseBank(four_cases()), narratives);
    m.clear_log();
    StrategySpec spec;
    spec.kind = StrategyKind::s2rd;
    spec.responder = "resp";
    spec.embedder = "emb";
    const bool prepared = run % 2 == 0;
    int prepared_calls = prepared ? runner.prepare_narratives("resp") : 0;
    auto records = runner.run_all(ds.records, spec, 1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 4));

    std::map<std::string, int> narrative_calls;
    for (const auto& rec : records) {
      int chat = 0, embed = 0;
      const auto& owner = ds.find(rec.query_id)->character_id;
      for (const auto& call : rec.call_log) {
        if (call.stage == "narrative") {
          narrative_calls[owner]++;
          continue;
        }
        (call.kind == "chat" ? chat : embed)++;
      }
      c.expect(chat == 3 && embed == 3, "query " + rec.query_id + " made " + std::to_string(chat) + " chat + " +
                                            std::to_string(embed) + " embed calls");
      c.expect(rec.trace.recollection.has_value() && !rec.trace.recollection->empty(), "empty K_rec");
      if (rec.trace.recollection)
        for (const auto& k : *rec.trace.recollection)
          c.expect(contexts.at(owner).index->contains(k.chunk_id), "K_rec chunk " + k.chunk_id + " not owned by " + owner);
    }
    std::set<std::string> owners;
    for (const auto& r : ds.records) owners.insert(r.character_id);
    std::map<std::string, int> narrated;  // by system text, which carries the persona
    for (const auto& call : m.calls())
      if (call.kind == EndpointKind::chat && call.texts[0].find("Your self-narrative:") != std::string::npos)
        narrated[call.texts[0]]++;
    c.expect(narrated.size() == contexts.size(), "expected one narrative prompt per character, saw " +
                                                     std::to_string(narrated.size()));
    for (const auto& [prompt, n] : narrated) c.expect(n == 1, "a character was narrated " + std::to_string(n) + " times");
    for (const auto& [owner, n] : narrative_calls)
      c.expect(n == 1, "character " + owner + " has " + std::to_string(n) + " narrative log entries");
    if (prepared) {
      c.expect(prepared_calls == static_cast<int>(contexts.size()),
               "prepare_narratives made " + std::to_string(prepared_calls) + " calls");
      c.expect(narrative_calls.empty(), "narrative regenerated after preparation");
    }
    c.expect(narratives.size() == contexts.size(), "one cached narrative per character");
  }
}

// ---------------------------------------------------------------- judge

void judge_parser(Checker& c) {
  struct Row {
    const char* text;
    std::optional<JudgeVerdict> verdict;
    bool missing_explanation;
  };
  using V = JudgeVerdict;
  const Row rows[] = {
      {"explanation: corrected the tutor's name.\n\njudgment: yes", V::yes, false},
      {"Explanation: fine\n\nJudgment: YES", V::yes, false},
      {"EXPLANATION: fine\n\nJUDGMENT: no", V::no, false},
      {"Explanation: fine\n\nJudgement: Yes", V::yes, false},
      {"**Explanation:** spotted it\n\n**Judgment:** No", V::no, false},
      {"explanation: x\n\njudgment:yes.", V::yes, false},
      {"judgment: no", V::no, true},
      {"JUDGMENT: No", V::no, true},
      {"explanation: first\n\njudgment: yes\n\njudgment: no", V::no, false},
      {"explanation: torn\n\njudgment: maybe", std::nullopt, false},
      {"The response is good.", std::nullopt, true},
      {"", std::nullopt, true},
      {"asdf qwer zxcv", std::nullopt, true},
  };
  for (const auto& r : rows) {
    auto p = parse_judgment(r.text);
    c.expect(p.verdict == r.verdict, std::string("verdict for: ") + r.text);
    c.expect(p.missing_explanation == r.missing_explanation, std::string("explanation flag for: ") + r.text);
  }

  // gibberish on every attempt ends invalid after exactly three calls
  rctest::MockRig rig(false);
  rig.chat("judge");
  rig.mock->on_chat(MatchKind::any, "", "qwerty uiop");
  DatasetRecord entry;
  entry.query_id = "m-kke";
  entry.error_type = ErrorType::kke;
  entry.query = "Did you?";
  entry.source_memory = "I did.";
  DetectionRecord det;
  det.query_id = entry.query_id;
  det.response_text = "Sure.";
  auto g = judge_record(det, entry, "Ada", *rig.provider, "judge", TemplateSet::builtin());
  c.expect(g.verdict == JudgeVerdict::invalid, "gibberish x3 is not invalid");
  c.expect(rig.mock->chat_calls() == 3, "gibberish made " + std::to_string(rig.mock->chat_calls()) + " calls");

  // turning any verdict into invalid never raises a cell
  std::mt19937 rng(3);
  ProbingDataset ds;
  for (int i = 0; i < 48; ++i) {
    DatasetRecord r;
    r.query_id = "q" + std::to_string(i);
    r.error_type = i % 2 ? ErrorType::uke : ErrorType::kke;
    r.memory_category = kAllCategories[(i / 2) % 4];
    ds.records.push_back(r);
  }
  std::vector<Judgment> js;
  for (int t = 0; t < 3; ++t)
    for (const auto& r : ds.records) {
      Judgment j;
      j.query_id = r.query_id;
      j.trial_index = t;
      j.verdict = rng() % 3 ? V::yes : V::no;
      js.push_back(j);
    }
  auto cells_of = [](const ScoreTable& t) {
    std::vector<double> out;
    for (const auto& [type, row] : t.cells)
      for (const auto& [cat, cell] : row) out.push_back(cell.accuracy_mean);
    for (const auto& [type, cell] : t.averages) out.push_back(cell.accuracy_mean);
    out.push_back(t.overall.accuracy_mean);
    return out;
  };
  auto before = cells_of(score(js, ds));
  for (int i = 0; i < 100; ++i) {
    js[rng() % js.size()].verdict = V::invalid;
    auto after = cells_of(score(js, ds));
    for (std::size_t k = 0; k < before.size(); ++k)
      c.expect(after[k] <= before[k] + 1e-15, "invalid verdict raised a cell at mutation " + std::to_string(i));
    before = after;
  }
}

// ---------------------------------------------------------------- live

void live_smoke(Checker& c) {
  const char* config_path = std::getenv("ROLECHECK_LIVE_CONFIG");
  if (!config_path || !*config_path) throw Skip{"set ROLECHECK_LIVE_CONFIG to a config with real endpoints"};
  auto config = RunConfig::load(config_path);
  auto bundle = build_provider(config);
  auto& provider = *bundle.provider;
  const auto templates = TemplateSet::builtin();

  auto profile = ingest_character(rctest::fixture("characters/ada_voss.profile.json"));
  auto chunks = chunk(profile, config.chunk_sentences);
  if (chunks.size() > 5) chunks.resize(5);
  CharacterContext ctx;
  ctx.profile = profile;
  for (const auto& ch : chunks) ctx.chunk_text[ch.chunk_id] = ch.text;
  ctx.index = build_index(profile.character_id, chunks, provider, config.role("embedder"));
  NarrativeCache narratives;
  StrategyRunner runner(provider, templates, {{profile.character_id, ctx}},
                        CaseBank::load(rctest::fixture("e2e/cases.json")), narratives);

  const auto inputs = rctest::load_golden_inputs();
  DatasetRecord entry;
  entry.query_id = profile.character_id + "-live-kke";
  entry.character_id = profile.character_id;
  entry.memory_id = profile.character_id + "-live";
  entry.chunk_id = chunks.front().chunk_id;
  entry.error_type = ErrorType::kke;
  entry.query = inputs.query;
  entry.source_memory = inputs.correct_memory;
  for (auto kind : {StrategyKind::vanilla, StrategyKind::s2rd}) {
    StrategySpec spec;
    spec.kind = kind;
    spec.responder = config.role("responder");
    spec.embedder = config.role("embedder");
    auto rec = runner.run(entry, spec, 0);
    c.expect(!text::is_blank(rec.response_text), to_string(kind) + " returned an empty response");
    auto g = judge_record(rec, entry, profile.name, provider, config.role("judge"), templates);
    c.expect(g.verdict != JudgeVerdict::invalid, to_string(kind) + " judgment did not parse");
  }
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<void(Checker&)> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"prompt golden suite + 1000 fuzzed assemblies", 5, golden_suite},
      {"pipeline determinism (2 characters x 10 memories, seed 7)", 30, determinism},
      {"retrieval oracle (200 instances)", 10, retrieval_oracle},
      {"scoring oracle (100 sets, 44.24±0.00, SEM 0.05774)", 5, scoring_oracle},
      {"dataset invariants + pair gate", 5, dataset_invariants},
      {"S2RD call protocol (50 fuzzed runs)", 10, s2rd_protocol},
      {"judge parser tolerance + monotonicity", 5, judge_parser},
      {"live smoke (env-gated)", 120, live_smoke},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checker checker;
    std::string status = "PASS", detail;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(checker);
    } catch (const Skip& s) {
      status = "SKIP";
      detail = s.why;
    } catch (const std::exception& e) {
      checker.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (status != "SKIP") {
      if (!checker.failures.empty()) {
        status = "FAIL";
        detail = checker.failures.front() + " (" + std::to_string(checker.failures.size()) + " failed checks)";
      } else if (secs >= cr.budget_s) {
        status = "FAIL";
        detail = "over budget";
      }
    }
    if (status == "FAIL") ++failed;
    std::printf("%s  %-58s %7.2fs (budget %.0fs)%s%s\n", status.c_str(), cr.name, secs, cr.budget_s,
                detail.empty() ? "" : "  ", detail.c_str());
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
