#include "rolecheck/corpus.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>

#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

nlohmann::json CharacterProfile::to_json() const {
  return {{"character_id", character_id},
          {"name", name},
          {"persona_instruction", persona_instruction},
          {"corpus_path", corpus_path},
          {"corpus_text", corpus_text}};
}

CharacterProfile CharacterProfile::from_json(const nlohmann::json& j) {
  CharacterProfile p;
  p.character_id = j.at("character_id").get<std::string>();
  p.name = j.at("name").get<std::string>();
  p.persona_instruction = j.value("persona_instruction", "");
  p.corpus_path = j.value("corpus_path", "");
  p.corpus_text = j.value("corpus_text", "");
  return p;
}

nlohmann::json Chunk::to_json() const {
  return {{"chunk_id", chunk_id},
          {"character_id", character_id},
          {"ordinal", ordinal},
          {"sentence_count", sentence_count},
          {"text", text}};
}

Chunk Chunk::from_json(const nlohmann::json& j) {
  Chunk c;
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.character_id = j.at("character_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.sentence_count = j.at("sentence_count").get<int>();
  c.ordinal = j.at("ordinal").get<int>();
  return c;
}

std::string normalize_corpus(std::string_view raw) {
  std::string out;
  for (const auto& paragraph : text::split_blank_lines(raw)) {
    std::string p = text::collapse_whitespace(paragraph);
    if (p.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += p;
  }
  return out;
}

CharacterProfile ingest_character(const std::string& profile_file, const std::string& corpus_file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(profile_file));
  } catch (const nlohmann::json::exception& e) {
    throw MissingField("profile '" + profile_file + "' is not a valid JSON document: " + e.what());
  }
  auto field = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string() || text::is_blank(j[key].get<std::string>()))
      throw MissingField("profile '" + profile_file + "' is missing field '" + key + "'");
    return j[key].get<std::string>();
  };

  CharacterProfile p;
  p.name = text::trim(field("name"));
  p.persona_instruction = field("persona_instruction");
  if (p.persona_instruction.find(p.name) == std::string::npos)
    throw MissingField("profile '" + profile_file + "': persona_instruction must mention '" + p.name + "'");
  if (j.contains("character_id")) {
    p.character_id = text::slugify(field("character_id"));
  } else {
    // "name.profile.json" and "name.json" both yield "name".
    auto stem = std::filesystem::path(profile_file).stem();
    if (stem.extension() == ".profile") stem = stem.stem();
    p.character_id = text::slugify(stem.string());
  }
  if (p.character_id.empty()) throw MissingField("profile '" + profile_file + "' yields an empty character_id");

  std::string corpus = corpus_file;
  if (corpus.empty()) {
    corpus = field("corpus_path");
    auto path = std::filesystem::path(corpus);
    if (path.is_relative()) corpus = (std::filesystem::path(profile_file).parent_path() / path).string();
  }
  p.corpus_path = corpus;
  if (!std::filesystem::exists(corpus)) throw EmptyCorpus("corpus file '" + corpus + "' does not exist");
  p.corpus_text = normalize_corpus(text::read_file(corpus));
  if (p.corpus_text.empty()) throw EmptyCorpus("corpus file '" + corpus + "' is empty");
  return p;
}

namespace {

constexpr std::array<std::string_view, 30> kAbbreviations = {
    "Mr", "Mrs", "Ms", "Dr", "St", "Jr", "Sr", "Prof", "Gen", "Col", "Capt", "Lt", "Sgt", "Rev", "Hon",
    "Gov", "Pres", "Sen", "Rep", "Mt", "Ft", "No", "Vol", "vs", "etc", "ca", "approx", "Fr", "Bros", "Co"};

bool is_abbreviation(std::string_view word) {
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) return true;  // initial
  // "e.g", "i.e", "U.S" style dotted tokens
  if (word.find('.') != std::string_view::npos) return true;
  for (auto a : kAbbreviations)
    if (word == a) return true;
  return false;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

std::vector<SentenceSpan> split_sentences(std::string_view s) {
  std::vector<SentenceSpan> spans;
  std::size_t start = 0;
  auto skip_space = [&](std::size_t i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return i;
  };
  start = skip_space(0);
  std::size_t i = start;
  while (i < s.size()) {
    char c = s[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < s.size() && (is_closer(s[end]) || s[end] == '.' || s[end] == '!' || s[end] == '?')) ++end;
    bool at_text_end = skip_space(end) >= s.size();
    bool followed_by_space = end < s.size() && std::isspace(static_cast<unsigned char>(s[end]));
    if (!at_text_end && !followed_by_space) {
      i = end;
      continue;
    }
    std::size_t next = skip_space(end);
    if (!at_text_end && !std::isupper(static_cast<unsigned char>(s[next]))) {
      i = end;
      continue;
    }
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(s[w - 1]))) --w;
      std::string_view word = s.substr(w, i - w);
      while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\''))
        word.remove_prefix(1);
      if (!at_text_end && is_abbreviation(word)) {
        i = end;
        continue;
      }
    }
    bool paragraph_end = at_text_end || s.substr(end, next - end).find("\n\n") != std::string_view::npos;
    spans.push_back({start, next, paragraph_end});
    start = next;
    i = next;
  }
  if (start < s.size()) spans.push_back({start, s.size(), true});  // unterminated tail
  return spans;
}

std::string chunk_id_for(const std::string& character_id, int ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-c%04d", ordinal);
  return character_id + buf;
}

std::vector<Chunk> chunk(const CharacterProfile& profile, int target_sentences) {
  if (target_sentences < 1) throw UsageError("target_sentences must be >= 1");
  const std::string& src = profile.corpus_text;
  auto sentences = split_sentences(src);
  if (sentences.empty()) throw EmptyCorpus("character '" + profile.character_id + "' has no sentences");

  const int n = static_cast<int>(sentences.size());
  const int target = target_sentences;
  std::vector<std::pair<int, int>> ranges;  // [first, last] sentence indices
  int first = 0;
  while (first < n) {
    int remaining = n - first;
    int best = -1;
    for (int len = std::max(1, target - 2); len <= std::min(remaining, target + 2); ++len) {
      if (!sentences[static_cast<std::size_t>(first + len - 1)].ends_paragraph) continue;
      if (best < 0 || std::abs(len - target) < std::abs(best - target)) best = len;
    }
    int len = best > 0 ? best : std::min(target, remaining);
    ranges.emplace_back(first, first + len - 1);
    first += len;
  }
  if (ranges.size() > 1 && ranges.back().second - ranges.back().first + 1 < 2) {
    int last = ranges.back().second;
    ranges.pop_back();
    ranges.back().second = last;
  }

  std::vector<Chunk> out;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    auto [a, b] = ranges[k];
    Chunk c;
    c.character_id = profile.character_id;
    c.ordinal = static_cast<int>(k);
    c.chunk_id = chunk_id_for(profile.character_id, c.ordinal);
    // The first chunk also owns any leading whitespace so slices tile the text.
    std::size_t begin = k == 0 ? 0 : sentences[static_cast<std::size_t>(a)].begin;
    std::size_t end = sentences[static_cast<std::size_t>(b)].end;
    c.text = src.substr(begin, end - begin);
    c.sentence_count = b - a + 1;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace rolecheck
