#include "rolecheck/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

nlohmann::json DatasetRecord::to_json() const {
  return {{"query_id", query_id},
          {"character_id", character_id},
          {"memory_id", memory_id},
          {"chunk_id", chunk_id},
          {"memory_category", to_string(memory_category)},
          {"error_type", to_string(error_type)},
          {"query", query},
          {"source_memory", source_memory},
          {"false_memory", false_memory},
          {"explanation", explanation},
          {"topics", topics}};
}

DatasetRecord DatasetRecord::from_json(const nlohmann::json& j) {
  DatasetRecord r;
  try {
    r.query_id = j.at("query_id").get<std::string>();
    r.character_id = j.at("character_id").get<std::string>();
    r.memory_id = j.at("memory_id").get<std::string>();
    r.chunk_id = j.at("chunk_id").get<std::string>();
    r.memory_category = category_from_string(j.at("memory_category").get<std::string>());
    r.error_type = error_type_from_string(j.at("error_type").get<std::string>());
    r.query = j.at("query").get<std::string>();
    r.source_memory = j.at("source_memory").get<std::string>();
    r.false_memory = j.value("false_memory", "");
    r.explanation = j.value("explanation", "");
    r.topics = j.value("topics", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed dataset record: ") + e.what());
  }
  return r;
}

const DatasetRecord* ProbingDataset::find(const std::string& query_id) const {
  for (const auto& r : records)
    if (r.query_id == query_id) return &r;
  return nullptr;
}

const CharacterProfile* ProbingDataset::character(const std::string& character_id) const {
  for (const auto& c : characters)
    if (c.character_id == character_id) return &c;
  return nullptr;
}

namespace {
bool record_less(const DatasetRecord& a, const DatasetRecord& b) {
  return std::tie(a.character_id, a.memory_id, a.error_type) < std::tie(b.character_id, b.memory_id, b.error_type);
}
}  // namespace

ProbingDataset assemble(const AssembleInput& in) {
  std::map<std::string, const Memory*> memories;
  for (const auto& m : in.memories) memories[m.memory_id] = &m;
  std::set<std::string> characters, chunks;
  for (const auto& p : in.profiles) characters.insert(p.character_id);
  for (const auto& c : in.chunks) chunks.insert(c.chunk_id);

  std::map<std::string, std::map<ErrorType, const ErrorQuery*>> by_memory;
  for (const auto& q : in.queries) {
    auto it = memories.find(q.memory_id);
    if (it == memories.end())
      throw IntegrityError("query '" + q.query_id + "' references unknown memory '" + q.memory_id + "'");
    const Memory& m = *it->second;
    if (!characters.count(m.character_id))
      throw IntegrityError("memory '" + m.memory_id + "' references unknown character '" + m.character_id + "'");
    if (!chunks.empty() && !chunks.count(m.chunk_id))
      throw IntegrityError("memory '" + m.memory_id + "' references unknown chunk '" + m.chunk_id + "'");
    auto& slot = by_memory[q.memory_id][q.error_type];
    if (slot) throw IntegrityError("memory '" + q.memory_id + "' has two " + to_string(q.error_type) + " queries");
    slot = &q;
  }

  ProbingDataset ds;
  ds.construction_seed = in.seed;
  ds.template_hashes = in.template_hashes;
  std::set<std::string> used_characters;
  for (const auto& [memory_id, pair] : by_memory) {
    auto k = pair.find(ErrorType::kke), u = pair.find(ErrorType::uke);
    if (k == pair.end() || u == pair.end()) continue;
    if (!pair_gate(k->second->screening_status, u->second->screening_status).kept()) continue;
    const Memory& m = *memories.at(memory_id);
    for (const ErrorQuery* q : {k->second, u->second}) {
      DatasetRecord r;
      r.query_id = q->query_id;
      r.character_id = m.character_id;
      r.memory_id = m.memory_id;
      r.chunk_id = m.chunk_id;
      r.memory_category = m.category;
      r.error_type = q->error_type;
      r.query = q->query_text;
      r.source_memory = m.text;
      r.false_memory = q->false_memory;
      r.explanation = q->explanation;
      r.topics = q->topics;
      ds.records.push_back(std::move(r));
    }
    used_characters.insert(m.character_id);
  }
  std::sort(ds.records.begin(), ds.records.end(), record_less);
  for (const auto& p : in.profiles)
    if (used_characters.count(p.character_id)) ds.characters.push_back(p);
  std::sort(ds.characters.begin(), ds.characters.end(),
            [](const auto& a, const auto& b) { return a.character_id < b.character_id; });
  return ds;
}

void validate(const ProbingDataset& ds) {
  std::set<std::string> ids;
  std::map<std::string, std::pair<int, int>> per_memory;
  std::map<MemoryCategory, std::pair<int, int>> per_category;
  for (const auto& r : ds.records) {
    if (!ids.insert(r.query_id).second) throw IntegrityError("duplicate query_id '" + r.query_id + "'");
    if (!ds.character(r.character_id))
      throw IntegrityError("record '" + r.query_id + "' references unknown character '" + r.character_id + "'");
    if (text::is_blank(r.query)) throw IntegrityError("record '" + r.query_id + "' has an empty query");
    auto& pm = per_memory[r.memory_id];
    auto& pc = per_category[r.memory_category];
    if (r.error_type == ErrorType::kke) ++pm.first, ++pc.first;
    else ++pm.second, ++pc.second;
  }
  for (const auto& [memory_id, n] : per_memory)
    if (n.first != 1 || n.second != 1)
      throw IntegrityError("memory '" + memory_id + "' has " + std::to_string(n.first) + " kke and " +
                           std::to_string(n.second) + " uke records");
  for (const auto& [category, n] : per_category)
    if (n.first != n.second) throw IntegrityError("category '" + to_string(category) + "' kke/uke counts differ");
  if (!std::is_sorted(ds.records.begin(), ds.records.end(), record_less))
    throw IntegrityError("records are not in (character_id, memory_id, error_type) order");
}

std::string manifest_path_for(const std::string& dataset_path) {
  std::string base = dataset_path;
  if (base.size() > 6 && base.compare(base.size() - 6, 6, ".jsonl") == 0) base.resize(base.size() - 6);
  return base + ".manifest.json";
}

void save(const ProbingDataset& ds, const std::string& path) {
  std::string body;
  for (const auto& r : ds.records) body += r.to_json().dump() + "\n";
  text::write_file(path, body);

  nlohmann::json counts{{"records", ds.records.size()}};
  for (auto t : {ErrorType::kke, ErrorType::uke})
    counts[to_string(t)] = std::count_if(ds.records.begin(), ds.records.end(),
                                         [t](const auto& r) { return r.error_type == t; });
  nlohmann::json chars = nlohmann::json::array();
  for (const auto& c : ds.characters) chars.push_back(c.to_json());
  nlohmann::json manifest{{"version", ds.version},
                          {"construction_seed", ds.construction_seed},
                          {"counts", counts},
                          {"template_hashes", ds.template_hashes},
                          {"characters", chars}};
  text::write_file(manifest_path_for(path), manifest.dump(2) + "\n");
}

ProbingDataset load(const std::string& path) {
  ProbingDataset ds;
  for (const auto& line : text::read_lines(path)) {
    if (text::is_blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IntegrityError("dataset line is not valid JSON: " + line.substr(0, 80));
    ds.records.push_back(DatasetRecord::from_json(j));
  }
  auto mpath = manifest_path_for(path);
  auto manifest = nlohmann::json::parse(text::read_file(mpath), nullptr, false);
  if (manifest.is_discarded()) throw IntegrityError("manifest '" + mpath + "' is not valid JSON");
  ds.version = manifest.value("version", "1");
  ds.construction_seed = manifest.value("construction_seed", std::uint64_t{0});
  ds.template_hashes = manifest.value("template_hashes", std::map<std::string, std::string>{});
  for (const auto& c : manifest.value("characters", nlohmann::json::array()))
    ds.characters.push_back(CharacterProfile::from_json(c));
  return ds;
}

const StatsCell& DatasetStats::at(const std::string& error_type, const std::string& category) const {
  static const StatsCell empty{};
  auto a = cells.find(error_type);
  if (a == cells.end()) return empty;
  auto b = a->second.find(category);
  return b == a->second.end() ? empty : b->second;
}

nlohmann::json DatasetStats::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [t, row] : cells)
    for (const auto& [c, cell] : row) j[t][c] = {{"count", cell.count}, {"mean_words", cell.mean_words}};
  return j;
}

DatasetStats stats(const ProbingDataset& ds) {
  if (ds.records.empty()) throw EmptyDataset("dataset has no records");
  // Sums are accumulated as integers so the result ignores record order.
  std::map<std::string, std::map<std::string, std::pair<int, long long>>> acc;
  for (const auto& r : ds.records) {
    const int w = text::word_count(r.query);
    for (const auto& t : {to_string(r.error_type), std::string("total")})
      for (const auto& c : {to_string(r.memory_category), std::string("total")}) {
        auto& a = acc[t][c];
        ++a.first;
        a.second += w;
      }
  }
  DatasetStats s;
  for (const auto& t : {std::string("kke"), std::string("uke"), std::string("total")}) {
    for (auto c : kAllCategories) s.cells[t][to_string(c)] = {};
    s.cells[t]["total"] = {};
  }
  for (const auto& [t, row] : acc)
    for (const auto& [c, a] : row) s.cells[t][c] = {a.first, static_cast<double>(a.second) / a.first};
  return s;
}

std::string render_stats(const DatasetStats& s) {
  auto cell = [](const StatsCell& c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d/%.1f", c.count, c.mean_words);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "| Category | KKE | UKE | Total |\n|---|---|---|---|\n";
  for (auto c : kAllCategories) {
    auto k = to_string(c);
    out << "| " << category_label(c) << " | " << cell(s.at("kke", k)) << " | " << cell(s.at("uke", k)) << " | "
        << cell(s.at("total", k)) << " |\n";
  }
  out << "| Total | " << cell(s.at("kke", "total")) << " | " << cell(s.at("uke", "total")) << " | "
      << cell(s.at("total", "total")) << " |\n";
  return out.str();
}

}  // namespace rolecheck
