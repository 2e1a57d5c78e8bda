#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rolecheck {

struct CharacterProfile {
  std::string character_id;
  std::string name;
  std::string persona_instruction;
  std::string corpus_path;
  // Normalized corpus: whitespace collapsed inside paragraphs, paragraphs
  // joined by a blank line ("\n\n").
  std::string corpus_text;

  nlohmann::json to_json() const;
  static CharacterProfile from_json(const nlohmann::json& j);
};

struct Chunk {
  std::string chunk_id;
  std::string character_id;
  std::string text;  // exact slice of the normalized corpus, separators included
  int sentence_count = 0;
  int ordinal = 0;

  nlohmann::json to_json() const;
  static Chunk from_json(const nlohmann::json& j);
};

// A sentence as a byte span of the normalized text. Spans tile the text:
// each span runs up to the start of the next sentence.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool ends_paragraph = false;
};

// Profile file: JSON object with name, persona_instruction, corpus_path
// (relative paths resolve against the profile's directory) and optional
// character_id. If corpus_file is empty the profile's corpus_path is used.
// Throws MissingField, EmptyCorpus, IoError.
CharacterProfile ingest_character(const std::string& profile_file, const std::string& corpus_file = {});

std::string normalize_corpus(std::string_view raw);

// Splits on . ! ? (optionally followed by closing quotes/brackets) when the
// next non-space character is upper-case or the text ends. Tokens in the
// abbreviation stop-list and single-letter initials never end a sentence.
std::vector<SentenceSpan> split_sentences(std::string_view normalized);

// Greedy paragraph-aware packing around `target_sentences`:
//  - from the current start, prefer to end at a paragraph boundary (end of
//    text counts) whose chunk length lies within target +-2, closest to the
//    target, shorter on ties;
//  - otherwise cut at exactly target sentences (or whatever remains);
//  - a final chunk with fewer than 2 sentences is merged into its predecessor.
// Throws EmptyCorpus when the text has no sentences.
std::vector<Chunk> chunk(const CharacterProfile& profile, int target_sentences = 8);

std::string chunk_id_for(const std::string& character_id, int ordinal);

}  // namespace rolecheck
