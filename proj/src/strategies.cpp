#include "rolecheck/strategies.hpp"

#include <algorithm>
#include <regex>
#include <sstream>
#include <set>

#include "rolecheck/errors.hpp"
#include "rolecheck/parallel.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

namespace {
constexpr std::pair<StrategyKind, const char*> kNames[] = {
    {StrategyKind::vanilla, "vanilla"}, {StrategyKind::cot, "cot"},
    {StrategyKind::few_shot, "few_shot"}, {StrategyKind::self_reflection, "self_reflection"},
    {StrategyKind::rag, "rag"}, {StrategyKind::rag_few_shot, "rag_few_shot"},
    {StrategyKind::s2rd, "s2rd"}};
}  // namespace

std::string to_string(StrategyKind k) {
  for (auto [kind, name] : kNames)
    if (kind == k) return name;
  return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
  for (auto [kind, name] : kNames)
    if (s == name) return kind;
  throw UsageError("unknown strategy '" + s + "'");
}

bool needs_index(StrategyKind k) {
  return k == StrategyKind::rag || k == StrategyKind::rag_few_shot || k == StrategyKind::s2rd;
}

bool needs_cases(StrategyKind k) {
  return k == StrategyKind::few_shot || k == StrategyKind::rag_few_shot || k == StrategyKind::s2rd;
}

// ---------------------------------------------------------------- case bank

CaseBank::CaseBank(std::vector<Case> cases) : cases_(std::move(cases)) {
  if (cases_.size() != 4) throw ConfigError("case bank needs exactly 4 cases, got " + std::to_string(cases_.size()));
  auto kke = std::count_if(cases_.begin(), cases_.end(), [](const Case& c) { return c.tag == ErrorType::kke; });
  if (kke != 2) throw ConfigError("case bank needs 2 kke and 2 uke cases");
  for (const auto& c : cases_)
    if (text::is_blank(c.query) || text::is_blank(c.response)) throw ConfigError("case bank entry with empty text");
}

CaseBank CaseBank::load(const std::string& path) {
  auto raw = text::read_file(path);
  std::vector<nlohmann::json> items;
  auto whole = nlohmann::json::parse(raw, nullptr, false);
  if (!whole.is_discarded() && whole.is_array()) {
    items.assign(whole.begin(), whole.end());
  } else {
    for (const auto& line : text::read_lines(path)) {
      if (text::is_blank(line)) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ConfigError("case bank '" + path + "' is neither a JSON array nor JSON lines");
      items.push_back(j);
    }
  }
  std::vector<Case> cases;
  for (const auto& j : items) {
    if (!j.contains("query") || !j.contains("response"))
      throw ConfigError("case bank entry needs 'query' and 'response'");
    cases.push_back({j["query"].get<std::string>(), j["response"].get<std::string>(),
                     error_type_from_string(j.value("error_type", "kke"))});
  }
  return CaseBank(std::move(cases));
}

void CaseBank::check_overlap(const ProbingDataset& dataset) const {
  std::set<std::string> queries;
  for (const auto& r : dataset.records) queries.insert(text::collapse_whitespace(text::trim(r.query)));
  for (const auto& c : cases_)
    if (queries.count(text::collapse_whitespace(text::trim(c.query))))
      throw CaseOverlap("case query also appears in the dataset: " + c.query);
}

// ---------------------------------------------------------------- records

void StrategySpec::check() const {
  if (responder.empty()) throw ConfigError("strategy needs a responder endpoint");
  if (k_retrieval < 1) throw ConfigError("k_retrieval must be >= 1");
  if (m_seeds < 1) throw ConfigError("m_seeds must be >= 1");
  if (k_per_seed < 1) throw ConfigError("k_per_seed must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (needs_index(kind) && embedder.empty()) throw ConfigError(to_string(kind) + " needs an embedding endpoint");
}

nlohmann::json StrategySpec::to_json() const {
  return {{"kind", to_string(kind)},   {"responder", responder},   {"embedder", embedder},
          {"k_retrieval", k_retrieval}, {"m_seeds", m_seeds},       {"k_per_seed", k_per_seed},
          {"iterations", iterations}};
}

nlohmann::json CallSummary::to_json(bool with_telemetry) const {
  nlohmann::json j{{"stage", stage}, {"kind", kind}, {"prompt_sha256", prompt_sha256}};
  if (with_telemetry) {
    j["cache_hit"] = cache_hit;
    j["attempts"] = attempts;
  }
  return j;
}

CallSummary CallSummary::from_json(const nlohmann::json& j) {
  return {j.at("stage").get<std::string>(), j.at("kind").get<std::string>(), j.value("prompt_sha256", ""),
          j.value("cache_hit", false), j.value("attempts", 0)};
}

namespace {
nlohmann::json chunks_json(const std::vector<RetrievedChunk>& v) {
  auto out = nlohmann::json::array();
  for (const auto& c : v) out.push_back({{"chunk_id", c.chunk_id}, {"score", c.score}, {"text", c.text}});
  return out;
}

std::vector<RetrievedChunk> chunks_from(const nlohmann::json& j) {
  std::vector<RetrievedChunk> out;
  for (const auto& c : j)
    out.push_back({c.at("chunk_id").get<std::string>(), c.at("score").get<double>(), c.value("text", "")});
  return out;
}
}  // namespace

nlohmann::json Trace::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (narrative) j["narrative"] = *narrative;
  if (seed_memories) j["seed_memories"] = *seed_memories;
  if (recollection) j["recollection"] = chunks_json(*recollection);
  if (doubt) j["doubt"] = *doubt;
  if (retrieved_context) j["retrieved_context"] = chunks_json(*retrieved_context);
  if (reflection_first_pass) j["reflection_first_pass"] = *reflection_first_pass;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

Trace Trace::from_json(const nlohmann::json& j) {
  Trace t;
  if (j.contains("narrative")) t.narrative = j["narrative"].get<std::string>();
  if (j.contains("seed_memories")) t.seed_memories = j["seed_memories"].get<std::vector<std::string>>();
  if (j.contains("recollection")) t.recollection = chunks_from(j["recollection"]);
  if (j.contains("doubt")) t.doubt = j["doubt"].get<std::string>();
  if (j.contains("retrieved_context")) t.retrieved_context = chunks_from(j["retrieved_context"]);
  if (j.contains("reflection_first_pass")) t.reflection_first_pass = j["reflection_first_pass"].get<std::string>();
  t.warnings = j.value("warnings", std::vector<std::string>{});
  return t;
}

nlohmann::json DetectionRecord::to_json(bool with_telemetry) const {
  auto log = nlohmann::json::array();
  for (const auto& c : call_log) log.push_back(c.to_json(with_telemetry));
  return {{"query_id", query_id},   {"strategy", to_string(strategy)}, {"responder", responder},
          {"trial_index", trial_index}, {"response_text", response_text}, {"trace", trace.to_json()},
          {"call_log", log}};
}

DetectionRecord DetectionRecord::from_json(const nlohmann::json& j) {
  DetectionRecord r;
  r.query_id = j.at("query_id").get<std::string>();
  r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.responder = j.value("responder", "");
  r.trial_index = j.at("trial_index").get<int>();
  r.response_text = j.at("response_text").get<std::string>();
  r.trace = Trace::from_json(j.value("trace", nlohmann::json::object()));
  for (const auto& c : j.value("call_log", nlohmann::json::array())) r.call_log.push_back(CallSummary::from_json(c));
  return r;
}

// ---------------------------------------------------------------- narrative cache

std::string NarrativeCache::get_or_create(const std::string& character_id, const std::string& responder,
                                          const std::function<std::string()>& make, bool* created) {
  std::shared_future<std::string> fut;
  std::promise<std::string> promise;
  bool mine = false;
  {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(character_id, responder);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      fut = promise.get_future().share();
      entries_.emplace(key, fut);
      mine = true;
    } else {
      fut = it->second;
    }
  }
  if (created) *created = mine;
  if (mine) {
    try {
      promise.set_value(make());
    } catch (...) {
      // Drop the failed entry so a later caller can retry.
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mu_);
      entries_.erase(std::make_pair(character_id, responder));
    }
  }
  return fut.get();
}

std::size_t NarrativeCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------- runner

std::vector<std::string> parse_seed_memories(const std::string& reply) {
  static const std::regex marker(R"(^\s*<\s*memory\s*\d*\s*>\s*:?\s*)", std::regex::icase);
  static const std::regex header(R"(^\s*your correct memories\s*:?\s*$)", std::regex::icase);
  std::vector<std::string> out;
  for (const auto& seg : text::split_blank_lines(reply)) {
    // Template echoes may share a segment with the memory itself.
    std::string kept;
    std::istringstream lines(seg);
    for (std::string line; std::getline(lines, line);) {
      if (std::regex_match(line, header)) continue;
      line = text::trim(std::regex_replace(line, marker, "", std::regex_constants::format_first_only));
      if (line.empty()) continue;
      if (!kept.empty()) kept += ' ';
      kept += line;
    }
    if (!kept.empty()) out.push_back(kept);
  }
  return out;
}

StrategyRunner::StrategyRunner(Provider& provider, const TemplateSet& templates,
                               std::map<std::string, CharacterContext> characters, std::optional<CaseBank> cases,
                               NarrativeCache& narratives)
    : provider_(provider),
      templates_(templates),
      characters_(std::move(characters)),
      cases_(std::move(cases)),
      narratives_(narratives) {}

const CharacterContext& StrategyRunner::character(const std::string& character_id) const {
  auto it = characters_.find(character_id);
  if (it == characters_.end()) throw IntegrityError("no character context for '" + character_id + "'");
  return it->second;
}

const std::vector<Case>& StrategyRunner::require_cases() const {
  if (!cases_) throw ConfigError("this strategy needs a case bank");
  return cases_->cases();
}

std::string StrategyRunner::chat(const StrategySpec& spec, const CharacterContext& ch, const std::string& stage,
                                 const std::string& prompt, const std::string& salt, DetectionRecord& rec) {
  ChatExchange ex;
  try {
    ex = provider_.chat(spec.responder, ch.profile.persona_instruction, prompt, {salt, true});
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
  rec.call_log.push_back({stage, "chat", text::sha256_hex(prompt), ex.cache_hit, ex.attempts});
  return ex.response_text;
}

std::vector<RetrievedChunk> StrategyRunner::retrieve(const StrategySpec& spec, const CharacterContext& ch,
                                                     const std::string& stage, const std::string& query, int k,
                                                     DetectionRecord& rec) {
  if (!ch.index || ch.index->empty()) throw EmptyIndex("no index for character '" + ch.profile.character_id + "'");
  std::vector<SearchHit> hits;
  EmbeddingVector q;
  try {
    q = provider_.embed(spec.embedder, {query}).front();
    hits = ch.index->search_vector(q.values, k);
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
  rec.call_log.push_back({stage, "embed", text::sha256_hex(query), q.cache_hit, q.attempts});
  std::vector<RetrievedChunk> out;
  for (const auto& h : hits) {
    auto it = ch.chunk_text.find(h.chunk_id);
    out.push_back({h.chunk_id, h.score, it == ch.chunk_text.end() ? std::string() : it->second});
  }
  return out;
}

std::string StrategyRunner::narrative(const StrategySpec& spec, const CharacterContext& ch, DetectionRecord* rec) {
  const std::string prompt = s2rd_narrative_prompt(templates_, ch.profile.name);
  ChatExchange ex;
  bool created = false;
  auto text = narratives_.get_or_create(
      ch.profile.character_id, spec.responder,
      [&] {
        try {
          ex = provider_.chat(spec.responder, ch.profile.persona_instruction, prompt, {"", true});
        } catch (const Error& e) {
          throw StageError("narrative", e);
        }
        return ex.response_text;
      },
      &created);
  if (created && rec) rec->call_log.push_back({"narrative", "chat", text::sha256_hex(prompt), ex.cache_hit, ex.attempts});
  return text;
}

int StrategyRunner::prepare_narratives(const std::string& responder) {
  StrategySpec spec;
  spec.responder = responder;
  int made = 0;
  for (const auto& [id, ch] : characters_) {
    bool created = false;
    narratives_.get_or_create(
        id, responder,
        [&] {
          try {
            return provider_.chat(responder, ch.profile.persona_instruction,
                                  s2rd_narrative_prompt(templates_, ch.profile.name), {"", true})
                .response_text;
          } catch (const Error& e) {
            throw StageError("narrative", e);
          }
        },
        &created);
    made += created ? 1 : 0;
  }
  return made;
}

DetectionRecord StrategyRunner::run(const DatasetRecord& r, const StrategySpec& spec, int trial_index) {
  spec.check();
  const CharacterContext& ch = character(r.character_id);
  const std::string& role = ch.profile.name;
  const std::string salt = "trial=" + std::to_string(trial_index);

  DetectionRecord rec;
  rec.query_id = r.query_id;
  rec.strategy = spec.kind;
  rec.responder = spec.responder;
  rec.trial_index = trial_index;

  switch (spec.kind) {
    case StrategyKind::vanilla:
      rec.response_text = chat(spec, ch, "answer", vanilla_prompt(templates_, role, r.query), salt, rec);
      break;
    case StrategyKind::cot:
      rec.response_text = chat(spec, ch, "answer", cot_prompt(templates_, role, r.query), salt, rec);
      break;
    case StrategyKind::few_shot:
      rec.response_text =
          chat(spec, ch, "answer", few_shot_prompt(templates_, role, require_cases(), r.query), salt, rec);
      break;
    case StrategyKind::self_reflection: {
      auto first = chat(spec, ch, "first_pass", vanilla_prompt(templates_, role, r.query), salt, rec);
      rec.trace.reflection_first_pass = first;
      rec.response_text =
          chat(spec, ch, "reflection", self_reflection_prompt(templates_, role, first, r.query), salt, rec);
      break;
    }
    case StrategyKind::rag:
    case StrategyKind::rag_few_shot: {
      auto ctx = retrieve(spec, ch, "retrieval", r.query, spec.k_retrieval, rec);
      std::vector<std::string> texts;
      for (const auto& c : ctx) texts.push_back(c.text);
      rec.trace.retrieved_context = ctx;
      auto info = join_fragments(texts);
      auto prompt = spec.kind == StrategyKind::rag
                        ? rag_prompt(templates_, role, info, r.query)
                        : rag_few_shot_prompt(templates_, role, info, require_cases(), r.query);
      rec.response_text = chat(spec, ch, "answer", prompt, salt, rec);
      break;
    }
    case StrategyKind::s2rd:
      run_s2rd(r, spec, ch, salt, rec);
      break;
  }
  if (text::is_blank(rec.response_text)) throw EmptyResponse("empty response for '" + r.query_id + "'");
  return rec;
}

void StrategyRunner::run_s2rd(const DatasetRecord& r, const StrategySpec& spec, const CharacterContext& ch,
                              const std::string& salt, DetectionRecord& rec) {
  const std::string& role = ch.profile.name;
  const auto& cases = require_cases();
  const std::string nar = narrative(spec, ch, &rec);
  rec.trace.narrative = nar;

  std::vector<std::string> seeds_all;
  std::map<std::string, RetrievedChunk> pool;  // chunk_id -> best hit
  std::string doubt;
  for (int pass = 0; pass < spec.iterations; ++pass) {
    const std::string pass_salt = pass == 0 ? salt : salt + ";iter=" + std::to_string(pass);
    auto reply = chat(spec, ch, "recollection", s2rd_recollection_prompt(templates_, role, nar, r.query),
                      pass_salt, rec);
    auto seeds = parse_seed_memories(reply);
    if (seeds.empty()) throw SeedParseFailure("no seed memory in recollection reply for '" + r.query_id + "'");
    if (static_cast<int>(seeds.size()) < spec.m_seeds)
      rec.trace.warnings.push_back("recollection gave " + std::to_string(seeds.size()) + " of " +
                                   std::to_string(spec.m_seeds) + " seed memories");
    if (static_cast<int>(seeds.size()) > spec.m_seeds) seeds.resize(static_cast<std::size_t>(spec.m_seeds));
    for (const auto& seed : seeds) {
      for (auto& hit : retrieve(spec, ch, "seed_retrieval", seed, spec.k_per_seed, rec)) {
        auto it = pool.find(hit.chunk_id);
        if (it == pool.end() || hit.score > it->second.score) pool[hit.chunk_id] = hit;
      }
      seeds_all.push_back(seed);
    }
    std::vector<RetrievedChunk> krec;
    for (auto& [id, c] : pool) krec.push_back(c);
    std::sort(krec.begin(), krec.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
    });
    rec.trace.recollection = krec;
    std::vector<std::string> texts;
    for (const auto& c : krec) texts.push_back(c.text);
    doubt = chat(spec, ch, "doubt", s2rd_doubt_prompt(templates_, role, nar, join_fragments(texts), r.query),
                 pass_salt, rec);
  }
  rec.trace.seed_memories = seeds_all;
  rec.trace.doubt = doubt;

  std::vector<std::string> texts;
  for (const auto& c : *rec.trace.recollection) texts.push_back(c.text);
  rec.response_text = chat(spec, ch, "final",
                           s2rd_query_prompt(templates_, role, nar, join_fragments(texts), cases_block(cases), doubt,
                                             r.query),
                           salt, rec);
}

std::vector<DetectionRecord> StrategyRunner::run_all(const std::vector<DatasetRecord>& records,
                                                     const StrategySpec& spec, int trials, int workers) {
  if (trials < 1) throw UsageError("trials must be >= 1");
  spec.check();
  if (spec.kind == StrategyKind::s2rd) prepare_narratives(spec.responder);
  std::vector<DetectionRecord> out(records.size() * static_cast<std::size_t>(trials));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    const auto& r = records[i / static_cast<std::size_t>(trials)];
    out[i] = run(r, spec, static_cast<int>(i % static_cast<std::size_t>(trials)));
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query_id, a.trial_index) < std::tie(b.query_id, b.trial_index);
  });
  return out;
}

}  // namespace rolecheck
