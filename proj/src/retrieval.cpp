#include "rolecheck/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "rolecheck/errors.hpp"
#include "rolecheck/provider.hpp"

namespace rolecheck {

namespace {

double norm_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_vector(const std::vector<double>& v, const std::string& what) {
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
    throw InvalidEmbedding(what + " has a non-finite component");
  if (norm_of(v) == 0.0) throw InvalidEmbedding(what + " has zero norm");
}

constexpr char kMagic[8] = {'R', 'C', 'K', 'I', 'D', 'X', '0', '1'};

static_assert(std::endian::native == std::endian::little, "index persistence assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated index file '" + path + "'");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw UsageError("identifier too long for index file: " + s.substr(0, 40));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& in, const std::string& path) {
  auto n = take<std::uint16_t>(in, path);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw IoError("truncated index file '" + path + "'");
  return s;
}

}  // namespace

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different lengths");
  return dot(a, b) / (norm_of(a) * norm_of(b));
}

CorpusIndex::CorpusIndex(std::string character_id, std::vector<std::pair<std::string, std::vector<double>>> rows)
    : character_id_(std::move(character_id)) {
  std::set<std::string> seen;
  for (auto& [id, vec] : rows) {
    if (!seen.insert(id).second) throw UsageError("duplicate chunk id '" + id + "' in index");
    if (entries_.empty()) dim_ = vec.size();
    if (vec.empty() || vec.size() != dim_)
      throw DimensionMismatch("chunk '" + id + "' has dimension " + std::to_string(vec.size()) + ", expected " +
                              std::to_string(dim_));
    check_vector(vec, "embedding of chunk '" + id + "'");
    double n = norm_of(vec);
    entries_.push_back({id, std::move(vec), n});
  }
}

bool CorpusIndex::contains(const std::string& chunk_id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.chunk_id == chunk_id; });
}

std::vector<SearchHit> CorpusIndex::search_vector(const std::vector<double>& query, int k) const {
  if (k < 1) throw UsageError("k must be >= 1");
  if (entries_.empty()) throw EmptyIndex("index for '" + character_id_ + "' is empty");
  if (query.size() != dim_)
    throw DimensionMismatch("query has dimension " + std::to_string(query.size()) + ", index has " +
                            std::to_string(dim_));
  check_vector(query, "query embedding");
  const double qn = norm_of(query);
  std::vector<SearchHit> hits;
  hits.reserve(entries_.size());
  for (const auto& e : entries_) {
    double s = dot(query, e.vector) / (qn * e.norm);
    hits.push_back({e.chunk_id, std::clamp(s, -1.0, 1.0)});
  }
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                    [](const SearchHit& a, const SearchHit& b) {
                      return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
                    });
  hits.resize(n);
  return hits;
}

void CorpusIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index file '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  put_string(out, character_id_);
  for (const auto& e : entries_) {
    put_string(out, e.chunk_id);
    for (double x : e.vector) put<double>(out, x);
  }
  if (!out) throw IoError("failed writing index file '" + path + "'");
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index file '" + path + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("'" + path + "' is not an index file (bad magic)");
  auto dim = take<std::uint32_t>(in, path);
  auto count = take<std::uint32_t>(in, path);
  auto character_id = take_string(in, path);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  rows.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto id = take_string(in, path);
    std::vector<double> v(dim);
    for (auto& x : v) x = take<double>(in, path);
    rows.emplace_back(std::move(id), std::move(v));
  }
  return CorpusIndex(std::move(character_id), std::move(rows));
}

CorpusIndex build_index(const std::string& character_id, const std::vector<Chunk>& chunks, Provider& provider,
                        const std::string& embed_endpoint) {
  if (chunks.empty()) throw EmptyCorpus("no chunks to index for '" + character_id + "'");
  std::vector<std::string> texts;
  for (const auto& c : chunks) {
    if (c.character_id != character_id)
      throw UsageError("chunk '" + c.chunk_id + "' belongs to '" + c.character_id + "', not '" + character_id + "'");
    texts.push_back(c.text);
  }
  auto vectors = provider.embed(embed_endpoint, texts);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (std::size_t i = 0; i < chunks.size(); ++i) rows.emplace_back(chunks[i].chunk_id, std::move(vectors[i].values));
  return CorpusIndex(character_id, std::move(rows));
}

std::vector<SearchHit> search(const CorpusIndex& index, const std::string& query_text, int k, Provider& provider,
                              const std::string& embed_endpoint) {
  if (index.empty()) throw EmptyIndex("index for '" + index.character_id() + "' is empty");
  auto q = provider.embed(embed_endpoint, {query_text});
  return index.search_vector(q.front().values, k);
}

}  // namespace rolecheck
