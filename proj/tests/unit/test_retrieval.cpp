#include <gtest/gtest.h>

#include <cmath>

#include "rolecheck/errors.hpp"
#include "rolecheck/retrieval.hpp"
#include "support.hpp"

using namespace rolecheck;

namespace {

CorpusIndex three_docs() {
  return CorpusIndex("c", {{"doc0", {1, 0}}, {"doc1", {0, 1}}, {"doc2", {0.6, 0.8}}});
}

std::vector<Chunk> chunks(int n) {
  std::vector<Chunk> out;
  for (int i = 0; i < n; ++i) {
    Chunk c;
    c.character_id = "c";
    c.chunk_id = chunk_id_for("c", i);
    c.text = "chunk text number " + std::to_string(i) + " about topic " + std::to_string(i % 3);
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST(Retrieval, HandComputedCosineOrder) {
  auto hits = three_docs().search_vector({1, 0}, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].chunk_id, "doc0");
  EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
  EXPECT_EQ(hits[1].chunk_id, "doc2");
  EXPECT_NEAR(hits[1].score, 0.6, 1e-12);
  EXPECT_EQ(hits[2].chunk_id, "doc1");
  EXPECT_NEAR(hits[2].score, 0.0, 1e-12);
}

TEST(Retrieval, KLargerThanIndexReturnsAll) { EXPECT_EQ(three_docs().search_vector({1, 1}, 10).size(), 3u); }

TEST(Retrieval, TiesBreakByChunkId) {
  CorpusIndex idx("c", {{"b", {1, 1}}, {"a", {2, 2}}, {"c", {1, 1}}});
  auto hits = idx.search_vector({1, 1}, 3);
  EXPECT_EQ(hits[0].chunk_id, "a");
  EXPECT_EQ(hits[1].chunk_id, "b");
  EXPECT_EQ(hits[2].chunk_id, "c");
}

TEST(Retrieval, InvalidInputs) {
  EXPECT_THROW(CorpusIndex("c", {{"a", {0, 0}}}), InvalidEmbedding);
  EXPECT_THROW(CorpusIndex("c", {{"a", {NAN, 1}}}), InvalidEmbedding);
  EXPECT_THROW(CorpusIndex("c", {{"a", {1, 0}}, {"b", {1, 0, 0}}}), DimensionMismatch);
  EXPECT_THROW(CorpusIndex("c", {{"a", {1, 0}}, {"a", {0, 1}}}), UsageError);
  EXPECT_THROW(three_docs().search_vector({1, 0, 0}, 1), DimensionMismatch);
  EXPECT_THROW(three_docs().search_vector({0, 0}, 1), InvalidEmbedding);
  EXPECT_THROW(three_docs().search_vector({1, 0}, 0), UsageError);
  EXPECT_THROW(CorpusIndex().search_vector({1, 0}, 1), EmptyIndex);
}

TEST(Retrieval, SaveLoadPreservesEverything) {
  rctest::TempDir dir;
  auto idx = three_docs();
  idx.save(dir.file("c.idx"));
  auto back = CorpusIndex::load(dir.file("c.idx"));
  EXPECT_EQ(back.character_id(), "c");
  EXPECT_EQ(back.dim(), 2u);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.entries()[i].chunk_id, idx.entries()[i].chunk_id);
    EXPECT_EQ(back.entries()[i].vector, idx.entries()[i].vector);
  }
  EXPECT_EQ(back.search_vector({0.3, 0.7}, 3), idx.search_vector({0.3, 0.7}, 3));
  auto bytes = text::read_file(dir.file("c.idx"));
  EXPECT_EQ(bytes.substr(0, 8), "RCKIDX01");
  // magic + dim + count + (2 + 1) + 3 * (2 + 4 + 2 * 8)
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 3 + 3 * (2 + 4 + 16));
}

TEST(Retrieval, CorruptFileIsRejected) {
  rctest::TempDir dir;
  text::write_file(dir.file("bad.idx"), "NOTANIDX");
  EXPECT_THROW(CorpusIndex::load(dir.file("bad.idx")), IoError);
}

TEST(Retrieval, BuildIndexEmbedsEveryChunkOnceAndCaches) {
  rctest::MockRig rig;
  rig.embed("e", 4);
  rig.mock->on_embed_hashed(MatchKind::any, "", 16);
  auto idx = build_index("c", chunks(3), *rig.provider, "e");
  EXPECT_EQ(idx.size(), 3u);
  auto calls = rig.mock->embed_calls();
  build_index("c", chunks(3), *rig.provider, "e");
  EXPECT_EQ(rig.mock->embed_calls(), calls);
  EXPECT_THROW(build_index("c", {}, *rig.provider, "e"), EmptyCorpus);
}

TEST(Retrieval, PermutedChunksGiveIdenticalResults) {
  rctest::MockRig rig;
  rig.embed("e");
  rig.mock->on_embed_hashed(MatchKind::any, "", 16);
  auto cs = chunks(9);
  auto a = build_index("c", cs, *rig.provider, "e");
  std::reverse(cs.begin(), cs.end());
  std::rotate(cs.begin(), cs.begin() + 4, cs.end());
  auto b = build_index("c", cs, *rig.provider, "e");
  for (const auto& q : {"topic 1", "chunk text number 4", "nothing in common"})
    EXPECT_EQ(search(a, q, 5, *rig.provider, "e"), search(b, q, 5, *rig.provider, "e")) << q;
}

TEST(Retrieval, CosineHelper) {
  EXPECT_NEAR(cosine({1, 0}, {0.6, 0.8}), 0.6, 1e-12);
  EXPECT_NEAR(cosine({1, 2, 3}, {-1, -2, -3}), -1.0, 1e-12);
}
