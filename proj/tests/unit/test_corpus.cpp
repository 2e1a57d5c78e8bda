#include <gtest/gtest.h>

#include "rolecheck/corpus.hpp"
#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"
#include "support.hpp"

using namespace rolecheck;

namespace {

std::string sentences(int from, int to) {
  std::string out;
  for (int i = from; i <= to; ++i) {
    if (!out.empty()) out += ' ';
    out += "Sentence number " + std::to_string(i) + " is here.";
  }
  return out;
}

CharacterProfile profile_with(const std::string& raw) {
  CharacterProfile p;
  p.character_id = "tester";
  p.name = "Tester";
  p.corpus_text = normalize_corpus(raw);
  return p;
}

}  // namespace

TEST(Corpus, IngestReadsProfileAndCorpus) {
  auto p = ingest_character(rctest::fixture("characters/ada_voss.profile.json"));
  EXPECT_EQ(p.character_id, "ada-voss");
  EXPECT_EQ(p.name, "Ada Voss");
  EXPECT_EQ(p.corpus_text.find("  "), std::string::npos);
  EXPECT_EQ(p.corpus_text.substr(0, 8), "Ada Voss");
}

TEST(Corpus, CharacterIdFallsBackToFileStem) {
  auto p = ingest_character(rctest::fixture("characters/tomas_reyes.profile.json"));
  EXPECT_EQ(p.character_id, "tomas-reyes");
}

TEST(Corpus, MissingNameIsMissingField) {
  rctest::TempDir dir;
  text::write_file(dir.file("c.txt"), "Some text here.");
  text::write_file(dir.file("p.json"), R"({"persona_instruction": "x", "corpus_path": "c.txt"})");
  EXPECT_THROW(ingest_character(dir.file("p.json")), MissingField);
}

TEST(Corpus, EmptyCorpusIsRejected) {
  rctest::TempDir dir;
  text::write_file(dir.file("c.txt"), "   \n\n  ");
  text::write_file(dir.file("p.json"), R"({"name": "Bo", "persona_instruction": "You are Bo.", "corpus_path": "c.txt"})");
  EXPECT_THROW(ingest_character(dir.file("p.json")), EmptyCorpus);
}

TEST(Corpus, NineProfilesYieldNineDistinctIds) {
  rctest::TempDir dir;
  text::write_file(dir.file("c.txt"), "Some text here.");
  std::set<std::string> ids;
  for (int i = 0; i < 9; ++i) {
    std::string name = "Person " + std::to_string(i);
    auto path = dir.file("p" + std::to_string(i) + ".json");
    text::write_file(path, nlohmann::json{{"name", name}, {"persona_instruction", "You are " + name + "."},
                                          {"corpus_path", "c.txt"}}
                               .dump());
    ids.insert(ingest_character(path).character_id);
  }
  EXPECT_EQ(ids.size(), 9u);
}

TEST(Corpus, SentenceSplitterHonoursAbbreviationsAndInitials) {
  auto s = normalize_corpus("Mr. Smith met Dr. J. Watson at St. Paul. They talked! Did it rain? Yes.");
  auto spans = split_sentences(s);
  ASSERT_EQ(spans.size(), 4u);
  EXPECT_EQ(text::trim(s.substr(spans[0].begin, spans[0].end - spans[0].begin)),
            "Mr. Smith met Dr. J. Watson at St. Paul.");
}

TEST(Corpus, SpansTileTheText) {
  auto s = normalize_corpus(sentences(1, 5) + "\n\n" + sentences(6, 7));
  auto spans = split_sentences(s);
  ASSERT_EQ(spans.size(), 7u);
  EXPECT_EQ(spans.front().begin, 0u);
  EXPECT_EQ(spans.back().end, s.size());
  for (std::size_t i = 1; i < spans.size(); ++i) EXPECT_EQ(spans[i].begin, spans[i - 1].end);
  EXPECT_TRUE(spans[4].ends_paragraph);
  EXPECT_FALSE(spans[3].ends_paragraph);
}

TEST(Corpus, EmptyTextHasNoChunks) { EXPECT_THROW(chunk(profile_with("   ")), EmptyCorpus); }

TEST(Corpus, SixteenSentencesWithBreakAfterEightGiveTwoChunksOfEight) {
  auto chunks = chunk(profile_with(sentences(1, 8) + "\n\n" + sentences(9, 16)));
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].sentence_count, 8);
  EXPECT_EQ(chunks[1].sentence_count, 8);
  EXPECT_EQ(chunks[0].chunk_id, "tester-c0000");
  EXPECT_EQ(chunks[1].chunk_id, "tester-c0001");
}

TEST(Corpus, NineSentencesWithoutBreaksMergeIntoOneChunk) {
  auto chunks = chunk(profile_with(sentences(1, 9)));
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].sentence_count, 9);
}

TEST(Corpus, PrefersNearbyParagraphBoundary) {
  // Break after 7: within target +-2, so the first chunk ends there.
  auto chunks = chunk(profile_with(sentences(1, 7) + "\n\n" + sentences(8, 20)));
  ASSERT_GE(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].sentence_count, 7);
}

TEST(Corpus, ChunksConcatenateToTheCorpus) {
  auto p = ingest_character(rctest::fixture("characters/ada_voss.profile.json"));
  auto chunks = chunk(p);
  EXPECT_EQ(chunks.size(), 5u);
  std::string joined;
  int total = 0;
  for (const auto& c : chunks) {
    joined += c.text;
    total += c.sentence_count;
  }
  EXPECT_EQ(joined, p.corpus_text);
  EXPECT_EQ(total, static_cast<int>(split_sentences(p.corpus_text).size()));
}

TEST(Corpus, ProfileJsonRoundTrip) {
  auto p = ingest_character(rctest::fixture("characters/ada_voss.profile.json"));
  auto q = CharacterProfile::from_json(p.to_json());
  EXPECT_EQ(q.to_json(), p.to_json());
}
