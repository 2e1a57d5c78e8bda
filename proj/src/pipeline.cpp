#include "rolecheck/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "rolecheck/parallel.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/templates.hpp"

namespace rolecheck {

DirLock::DirLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto path = (dir / ".lock").string();
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file '" + path + "'");
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw IoError("'" + dir.string() + "' is locked by another rolecheck process");
  }
}

DirLock::~DirLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::vector<CharacterProfile> load_characters(const Workspace& ws) {
  return read_jsonl<CharacterProfile>(ws.file("characters.jsonl"));
}
std::vector<Chunk> load_chunks(const Workspace& ws) { return read_jsonl<Chunk>(ws.file("chunks.jsonl")); }
std::vector<Memory> load_memories(const Workspace& ws) { return read_jsonl<Memory>(ws.file("memories.jsonl")); }
std::vector<ErrorQuery> load_queries(const Workspace& ws) { return read_jsonl<ErrorQuery>(ws.file("queries.jsonl")); }

namespace {

std::map<std::string, CharacterProfile> characters_by_id(const Workspace& ws) {
  std::map<std::string, CharacterProfile> out;
  for (auto& c : load_characters(ws)) out.emplace(c.character_id, std::move(c));
  return out;
}

const CharacterProfile& profile_of(const std::map<std::string, CharacterProfile>& m, const std::string& id) {
  auto it = m.find(id);
  if (it == m.end()) throw IntegrityError("unknown character '" + id + "'");
  return it->second;
}

void require_file(const std::string& path, const std::string& stage) {
  if (!std::filesystem::exists(path))
    throw UsageError("'" + path + "' does not exist; run '" + stage + "' first");
}

}  // namespace

CharacterProfile stage_ingest(const Workspace& ws, const std::string& profile_file, const std::string& corpus_file) {
  auto profile = ingest_character(profile_file, corpus_file);
  auto all = characters_by_id(ws);
  all.insert_or_assign(profile.character_id, profile);
  std::vector<CharacterProfile> list;
  for (auto& [id, c] : all) list.push_back(c);
  write_jsonl(ws.file("characters.jsonl"), list);
  return profile;
}

int stage_chunk(const Workspace& ws, int target_sentences) {
  require_file(ws.file("characters.jsonl"), "ingest");
  std::vector<Chunk> all;
  for (const auto& c : load_characters(ws)) {
    auto chunks = chunk(c, target_sentences);
    all.insert(all.end(), chunks.begin(), chunks.end());
  }
  write_jsonl(ws.file("chunks.jsonl"), all);
  return static_cast<int>(all.size());
}

MemgenSummary stage_gen_memories(const Workspace& ws, Provider& provider, const std::string& endpoint,
                                 const TemplateSet& templates, int workers) {
  require_file(ws.file("chunks.jsonl"), "chunk");
  const auto characters = characters_by_id(ws);
  const auto chunks = load_chunks(ws);
  std::vector<GeneratedMemories> results(chunks.size());
  std::vector<std::optional<std::string>> failures(chunks.size());
  parallel_for(chunks.size(), workers, [&](std::size_t i) {
    try {
      results[i] = generate_memories(chunks[i], profile_of(characters, chunks[i].character_id).name, provider,
                                     endpoint, templates);
    } catch (const ParseFailure& e) {
      failures[i] = e.what();
    }
  });

  MemgenSummary s;
  s.chunks = static_cast<int>(chunks.size());
  std::vector<Memory> all;
  nlohmann::json rejects = nlohmann::json::array();
  std::string reject_lines;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (failures[i]) {
      ++s.parse_failures;
      reject_lines += nlohmann::json{{"chunk_id", chunks[i].chunk_id}, {"error", *failures[i]}}.dump() + "\n";
      continue;
    }
    for (const auto& r : results[i].rejects)
      reject_lines += nlohmann::json{{"chunk_id", chunks[i].chunk_id}, {"segment", r}}.dump() + "\n";
    s.generated += static_cast<int>(results[i].memories.size());
    auto filtered = rule_filter(std::move(results[i].memories));
    s.pending += static_cast<int>(filtered.kept.size());
    s.rule_rejected += static_cast<int>(filtered.rejected.size());
    all.insert(all.end(), filtered.kept.begin(), filtered.kept.end());
    all.insert(all.end(), filtered.rejected.begin(), filtered.rejected.end());
  }
  std::sort(all.begin(), all.end(), [](const Memory& a, const Memory& b) { return a.memory_id < b.memory_id; });
  write_jsonl(ws.file("memories.jsonl"), all);
  text::write_file(ws.file("memgen_rejects.jsonl"), reject_lines);
  return s;
}

InjectSummary stage_inject(const Workspace& ws, Provider& provider, const std::string& endpoint,
                           const TemplateSet& templates, const SubDisciplineRegistry& registry, std::uint64_t seed,
                           int workers) {
  require_file(ws.file("memories.jsonl"), "gen-memories");
  const auto characters = characters_by_id(ws);
  std::vector<Memory> kept;
  for (auto& m : load_memories(ws))
    if (m.screening_status == ScreeningStatus::kept) kept.push_back(std::move(m));
  if (kept.empty()) throw UsageError("no kept memories; finalize memory screening first");

  std::vector<ErrorQuery> queries(kept.size() * 2);
  parallel_for(kept.size(), workers, [&](std::size_t i) {
    const Memory& m = kept[i];
    const auto& role = profile_of(characters, m.character_id).name;
    auto fill = [&](ErrorQuery& q, ErrorType type, Injection inj) {
      q.query_id = query_id_for(m.memory_id, type);
      q.memory_id = m.memory_id;
      q.error_type = type;
      q.false_memory = std::move(inj.false_memory);
      q.explanation = std::move(inj.explanation);
      q.topics = std::move(inj.topics);
      q.review_flag = edit_region_count(m.text, q.false_memory) > 1;
    };
    try {
      fill(queries[2 * i], ErrorType::kke, inject_kke(m, role, provider, endpoint, templates));
      fill(queries[2 * i + 1], ErrorType::uke,
           inject_uke(m, role, registry, derive_seed(seed, m.memory_id), provider, endpoint, templates));
    } catch (const ParseFailure&) {
      // An unusable injection sinks the whole pair, as the pair gate would.
      for (auto type : {ErrorType::kke, ErrorType::uke}) {
        auto& q = queries[2 * i + (type == ErrorType::kke ? 0 : 1)];
        q = ErrorQuery{};
        q.query_id = query_id_for(m.memory_id, type);
        q.memory_id = m.memory_id;
        q.error_type = type;
        q.screening_status = ScreeningStatus::rejected;
      }
    }
  });
  InjectSummary s;
  s.memories = static_cast<int>(kept.size());
  s.queries = static_cast<int>(queries.size());
  for (const auto& q : queries) s.flagged += q.review_flag ? 1 : 0;
  write_jsonl(ws.file("queries.jsonl"), queries);
  return s;
}

TransformSummary stage_transform(const Workspace& ws, Provider& provider, const std::string& endpoint,
                                 const TemplateSet& templates, int workers) {
  require_file(ws.file("queries.jsonl"), "inject");
  const auto characters = characters_by_id(ws);
  std::map<std::string, std::string> memory_character;
  for (const auto& m : load_memories(ws)) memory_character[m.memory_id] = m.character_id;
  auto queries = load_queries(ws);
  std::vector<int> invalid(queries.size(), 0);
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    auto& q = queries[i];
    if (!q.query_text.empty() || q.screening_status != ScreeningStatus::pending) return;
    auto cid = memory_character.find(q.memory_id);
    if (cid == memory_character.end()) throw IntegrityError("query '" + q.query_id + "' has no memory");
    try {
      q.query_text = to_question(q.false_memory, profile_of(characters, cid->second).name, provider, endpoint,
                                 templates);
    } catch (const ValidationFailure&) {
      q.screening_status = ScreeningStatus::rejected;
      invalid[i] = 1;
    }
  });
  TransformSummary s;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (invalid[i]) ++s.invalid;
    else if (!queries[i].query_text.empty()) ++s.transformed;
  }
  write_jsonl(ws.file("queries.jsonl"), queries);
  return s;
}

std::unique_ptr<ScreeningStore> open_screening(const Workspace& ws, ItemKind kind, std::vector<std::string> roster) {
  auto store = std::make_unique<ScreeningStore>(std::move(roster), std::filesystem::path(ws.file(
                                                                       "verdicts_" + to_string(kind) + ".jsonl")));
  std::map<std::string, std::string> chunk_text;
  for (const auto& c : load_chunks(ws)) chunk_text[c.chunk_id] = text::trim(c.text);
  const auto memories = load_memories(ws);
  if (kind == ItemKind::memory) {
    for (const auto& m : memories) {
      if (m.screening_status != ScreeningStatus::pending) continue;
      store->add_item({m.memory_id, kind,
                       {{"source_chunk_text", chunk_text[m.chunk_id]},
                        {"candidate_text", m.text},
                        {"explanation", ""},
                        {"category", to_string(m.category)},
                        {"character_id", m.character_id}}});
    }
  } else {
    std::map<std::string, const Memory*> by_id;
    for (const auto& m : memories) by_id[m.memory_id] = &m;
    for (const auto& q : load_queries(ws)) {
      if (q.screening_status != ScreeningStatus::pending || q.query_text.empty()) continue;
      auto it = by_id.find(q.memory_id);
      if (it == by_id.end()) throw IntegrityError("query '" + q.query_id + "' has no memory");
      const Memory& m = *it->second;
      store->add_item({q.query_id, kind,
                       {{"source_chunk_text", chunk_text[m.chunk_id]},
                        {"candidate_text", q.query_text},
                        {"explanation", q.explanation},
                        {"category", to_string(m.category)},
                        {"error_type", to_string(q.error_type)},
                        {"memory_id", m.memory_id},
                        {"source_memory", m.text},
                        {"false_memory", q.false_memory},
                        {"topics", q.topics},
                        {"review_flag", q.review_flag},
                        {"character_id", m.character_id}}});
    }
  }
  return store;
}

ScreeningReport stage_finalize(const Workspace& ws, ItemKind kind, std::vector<std::string> roster,
                               int required_annotators) {
  auto store = open_screening(ws, kind, std::move(roster));
  auto report = store->finalize_intersection(kind, required_annotators);
  const std::set<std::string> kept(report.kept_ids.begin(), report.kept_ids.end());
  if (kind == ItemKind::memory) {
    auto memories = load_memories(ws);
    for (auto& m : memories) {
      if (m.screening_status != ScreeningStatus::pending || !store->has_item(m.memory_id)) continue;
      m.screening_status = kept.count(m.memory_id) ? ScreeningStatus::kept : ScreeningStatus::rejected;
      if (!kept.count(m.memory_id)) m.reject_reason = "screening";
    }
    write_jsonl(ws.file("memories.jsonl"), memories);
  } else {
    auto queries = load_queries(ws);
    std::map<std::string, std::map<ErrorType, ErrorQuery*>> pairs;
    for (auto& q : queries) {
      if (q.screening_status == ScreeningStatus::pending && store->has_item(q.query_id))
        q.screening_status = kept.count(q.query_id) ? ScreeningStatus::kept : ScreeningStatus::rejected;
      pairs[q.memory_id][q.error_type] = &q;
    }
    for (auto& [memory_id, pair] : pairs) {
      ErrorQuery* k = pair.count(ErrorType::kke) ? pair[ErrorType::kke] : nullptr;
      ErrorQuery* u = pair.count(ErrorType::uke) ? pair[ErrorType::uke] : nullptr;
      if (!k || !u) {
        for (ErrorQuery* q : {k, u})
          if (q) q->screening_status = ScreeningStatus::rejected;
        continue;
      }
      if (k->screening_status == ScreeningStatus::pending || u->screening_status == ScreeningStatus::pending) continue;
      auto gate = pair_gate(k->screening_status, u->screening_status);
      k->screening_status = gate.kke;
      u->screening_status = gate.uke;
    }
    write_jsonl(ws.file("queries.jsonl"), queries);
  }
  text::write_file(ws.file("screening_" + to_string(kind) + ".json"), report.to_json().dump(2) + "\n");
  return report;
}

ProbingDataset stage_build_dataset(const Workspace& ws, std::uint64_t seed,
                                   const std::map<std::string, std::string>& template_hashes,
                                   const std::string& out_path) {
  require_file(ws.file("queries.jsonl"), "inject");
  AssembleInput in;
  in.queries = load_queries(ws);
  in.memories = load_memories(ws);
  in.profiles = load_characters(ws);
  in.chunks = load_chunks(ws);
  in.seed = seed;
  in.template_hashes = template_hashes;
  auto ds = assemble(in);
  validate(ds);
  save(ds, out_path.empty() ? ws.file("dataset.jsonl") : out_path);
  return ds;
}

std::map<std::string, CorpusIndex> stage_embed_index(const Workspace& ws, Provider& provider,
                                                     const std::string& embedder,
                                                     const std::vector<std::string>& character_ids) {
  require_file(ws.file("chunks.jsonl"), "chunk");
  std::map<std::string, std::vector<Chunk>> by_character;
  for (auto& c : load_chunks(ws)) by_character[c.character_id].push_back(std::move(c));
  std::map<std::string, CorpusIndex> out;
  for (auto& [cid, chunks] : by_character) {
    if (!character_ids.empty() && std::find(character_ids.begin(), character_ids.end(), cid) == character_ids.end())
      continue;
    auto index = build_index(cid, chunks, provider, embedder);
    std::filesystem::create_directories(std::filesystem::path(ws.index_file(cid)).parent_path());
    index.save(ws.index_file(cid));
    out.emplace(cid, std::move(index));
  }
  return out;
}

RunResult stage_run(const RunOptions& o, Provider& provider, const TemplateSet& templates) {
  if (o.run_id.empty()) throw UsageError("run id must be non-empty");
  if (o.trials < 1) throw UsageError("trials must be >= 1");
  o.spec.check();
  auto dataset = load(o.dataset_path);
  validate(dataset);
  std::optional<CaseBank> cases;
  if (!o.case_bank.empty()) {
    cases = CaseBank::load(o.case_bank);
    cases->check_overlap(dataset);
  } else if (needs_cases(o.spec.kind)) {
    throw ConfigError(to_string(o.spec.kind) + " needs a case bank (--cases)");
  }

  Workspace ws(o.work_dir.empty() ? std::filesystem::path(o.dataset_path).parent_path() : o.work_dir);
  std::map<std::string, CharacterContext> contexts;
  std::map<std::string, std::map<std::string, std::string>> chunk_text;
  if (needs_index(o.spec.kind))
    for (const auto& c : load_chunks(ws)) chunk_text[c.character_id][c.chunk_id] = c.text;
  for (const auto& p : dataset.characters) {
    CharacterContext ctx{p, std::nullopt, chunk_text[p.character_id]};
    if (needs_index(o.spec.kind)) {
      auto path = ws.index_file(p.character_id);
      if (!std::filesystem::exists(path))
        throw UsageError("no index for '" + p.character_id + "' at '" + path + "'; run 'embed-index' first");
      ctx.index = CorpusIndex::load(path);
    }
    contexts.emplace(p.character_id, std::move(ctx));
  }

  RunResult result;
  result.run_dir = o.runs_dir / o.run_id;
  DirLock lock(result.run_dir);
  NarrativeCache narratives;
  StrategyRunner runner(provider, templates, std::move(contexts), cases, narratives);
  if (o.spec.kind == StrategyKind::s2rd) result.narrative_calls = runner.prepare_narratives(o.spec.responder);
  result.records = runner.run_all(dataset.records, o.spec, o.trials, o.workers);

  std::string responses, calls;
  for (const auto& r : result.records) {
    responses += r.to_json(false).dump() + "\n";
    nlohmann::json log = nlohmann::json::array();
    for (const auto& c : r.call_log) log.push_back(c.to_json());
    calls += nlohmann::json{{"query_id", r.query_id}, {"trial_index", r.trial_index}, {"call_log", log}}.dump() + "\n";
  }
  text::write_file((result.run_dir / "responses.jsonl").string(), responses);
  text::write_file((result.run_dir / "calls.jsonl").string(), calls);
  nlohmann::json manifest{{"run_id", o.run_id},
                          {"dataset", std::filesystem::absolute(o.dataset_path).lexically_normal().string()},
                          {"dataset_sha256", text::sha256_hex(text::read_file(o.dataset_path))},
                          {"work_dir", std::filesystem::absolute(ws.dir).lexically_normal().string()},
                          {"strategy", o.spec.to_json()},
                          {"responder", provider.endpoint(o.spec.responder).to_json()},
                          {"trials", o.trials},
                          {"seed", o.seed},
                          {"records", result.records.size()},
                          {"narrative_calls", result.narrative_calls},
                          {"template_hashes", templates.hashes()}};
  if (!o.spec.embedder.empty()) manifest["embedder"] = provider.endpoint(o.spec.embedder).to_json();
  text::write_file((result.run_dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return result;
}

namespace {
nlohmann::json read_manifest(const std::filesystem::path& run_dir) {
  auto path = (run_dir / "manifest.json").string();
  if (!std::filesystem::exists(path)) throw UsageError("'" + run_dir.string() + "' is not a run directory");
  return nlohmann::json::parse(text::read_file(path));
}
}  // namespace

ScoreTable stage_judge(const JudgeOptions& o, Provider& provider, const TemplateSet& templates) {
  auto manifest = read_manifest(o.run_dir);
  const int trials = o.trials > 0 ? o.trials : manifest.at("trials").get<int>();
  auto dataset = load(manifest.at("dataset").get<std::string>());
  auto records = read_jsonl<DetectionRecord>((o.run_dir / "responses.jsonl").string());
  if (records.empty()) throw EmptyInput("run '" + o.run_dir.string() + "' has no responses");

  const auto responder = manifest.at("responder").value("id", "");
  if (o.judge == responder) std::fprintf(stderr, "warning: judge endpoint '%s' is also the responder\n", o.judge.c_str());

  std::vector<Judgment> judgments(records.size());
  DirLock lock(o.run_dir);
  parallel_for(records.size(), o.workers, [&](std::size_t i) {
    const auto* entry = dataset.find(records[i].query_id);
    if (!entry) throw IntegrityError("response for unknown query '" + records[i].query_id + "'");
    const auto* profile = dataset.character(entry->character_id);
    judgments[i] = judge_record(records[i], *entry, profile->name, provider, o.judge, templates);
  });
  write_jsonl((o.run_dir / "judgments.jsonl").string(), judgments);

  auto table = score(judgments, dataset, trials);
  table.run_id = manifest.value("run_id", o.run_dir.filename().string());
  table.model = manifest.at("responder").value("model_name", responder);
  table.strategy = manifest.at("strategy").value("kind", "");
  auto scores = table.to_json();
  scores["judge"] = provider.endpoint(o.judge).to_json();
  text::write_file((o.run_dir / "scores.json").string(), scores.dump(2) + "\n");
  return table;
}

std::string audit_sample(const std::filesystem::path& run_dir, int n, std::uint64_t seed) {
  if (n < 1) throw UsageError("sample size must be >= 1");
  auto manifest = read_manifest(run_dir);
  auto dataset = load(manifest.at("dataset").get<std::string>());
  auto records = read_jsonl<DetectionRecord>((run_dir / "responses.jsonl").string());
  auto judgments = read_jsonl<Judgment>((run_dir / "judgments.jsonl").string());
  if (judgments.empty()) throw EmptyInput("run has no judgments; run 'judge' first");
  std::map<std::pair<std::string, int>, const DetectionRecord*> by_key;
  for (const auto& r : records) by_key[{r.query_id, r.trial_index}] = &r;

  std::vector<std::size_t> order(judgments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(n)));
  std::sort(order.begin(), order.end());

  auto esc = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  };
  std::ostringstream out;
  out << "query_id,trial_index,error_type,query,source_memory,response,judge_verdict,judge_explanation,human_verdict\n";
  for (auto i : order) {
    const auto& g = judgments[i];
    const auto* entry = dataset.find(g.query_id);
    auto it = by_key.find({g.query_id, g.trial_index});
    out << esc(g.query_id) << ',' << g.trial_index << ',' << (entry ? to_string(entry->error_type) : "") << ','
        << esc(entry ? entry->query : "") << ',' << esc(entry ? entry->source_memory : "") << ','
        << esc(it == by_key.end() ? "" : it->second->response_text) << ',' << to_string(g.verdict) << ','
        << esc(g.judge_explanation) << ",\n";
  }
  return out.str();
}

}  // namespace rolecheck
