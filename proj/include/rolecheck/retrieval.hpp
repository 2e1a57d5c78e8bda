#pragma once

#include <string>
#include <vector>

#include "rolecheck/corpus.hpp"

namespace rolecheck {

class Provider;

struct SearchHit {
  std::string chunk_id;
  double score = 0.0;
  bool operator==(const SearchHit&) const = default;
};

// Exact cosine index over one character's chunks. Immutable once built, so
// concurrent searches need no coordination.
class CorpusIndex {
 public:
  struct Entry {
    std::string chunk_id;
    std::vector<double> vector;
    double norm = 0.0;
  };

  CorpusIndex() = default;
  // Throws DimensionMismatch on ragged vectors, InvalidEmbedding on zero
  // norms or non-finite values, UsageError on duplicate chunk ids.
  CorpusIndex(std::string character_id, std::vector<std::pair<std::string, std::vector<double>>> rows);

  const std::string& character_id() const noexcept { return character_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  bool contains(const std::string& chunk_id) const;

  // Descending cosine, ties by ascending chunk_id, min(k, size) results.
  // Throws EmptyIndex, DimensionMismatch, InvalidEmbedding, UsageError (k<1).
  std::vector<SearchHit> search_vector(const std::vector<double>& query, int k) const;

  // Binary layout, little-endian:
  //   "RCKIDX01" | u32 dim | u32 count | u16 len + character_id bytes |
  //   count x (u16 len + chunk_id bytes, dim x f64)
  void save(const std::string& path) const;
  static CorpusIndex load(const std::string& path);

 private:
  std::string character_id_;
  std::size_t dim_ = 0;
  std::vector<Entry> entries_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// One embed() call over all chunk texts. Throws EmptyCorpus with no chunks.
CorpusIndex build_index(const std::string& character_id, const std::vector<Chunk>& chunks, Provider& provider,
                        const std::string& embed_endpoint);

std::vector<SearchHit> search(const CorpusIndex& index, const std::string& query_text, int k, Provider& provider,
                              const std::string& embed_endpoint);

}  // namespace rolecheck
