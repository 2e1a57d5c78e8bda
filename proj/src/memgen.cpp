#include "rolecheck/memgen.hpp"

#include <cstdio>

#include "rolecheck/errors.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/templates.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

std::string to_string(MemoryCategory c) {
  switch (c) {
    case MemoryCategory::event: return "event";
    case MemoryCategory::relational: return "relational";
    case MemoryCategory::attitudinal: return "attitudinal";
    case MemoryCategory::identity: return "identity";
  }
  return "event";
}

std::string category_label(MemoryCategory c) {
  switch (c) {
    case MemoryCategory::event: return "Event Memory";
    case MemoryCategory::relational: return "Relational Memory";
    case MemoryCategory::attitudinal: return "Attitudinal Memory";
    case MemoryCategory::identity: return "Identity Memory";
  }
  return "Event Memory";
}

MemoryCategory category_from_string(const std::string& s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  throw ParseFailure("unknown memory category '" + s + "'");
}

std::optional<MemoryCategory> category_from_label(const std::string& label) {
  std::string norm = text::to_lower(text::collapse_whitespace(label));
  for (auto c : kAllCategories)
    if (norm == text::to_lower(category_label(c))) return c;
  return std::nullopt;
}

std::string to_string(ScreeningStatus s) {
  switch (s) {
    case ScreeningStatus::pending: return "pending";
    case ScreeningStatus::kept: return "kept";
    case ScreeningStatus::rejected: return "rejected";
  }
  return "pending";
}

ScreeningStatus screening_status_from_string(const std::string& s) {
  if (s == "pending") return ScreeningStatus::pending;
  if (s == "kept") return ScreeningStatus::kept;
  if (s == "rejected") return ScreeningStatus::rejected;
  throw ParseFailure("unknown screening status '" + s + "'");
}

nlohmann::json Memory::to_json() const {
  nlohmann::json j{{"memory_id", memory_id},
                   {"character_id", character_id},
                   {"chunk_id", chunk_id},
                   {"category", to_string(category)},
                   {"text", text},
                   {"word_count", word_count},
                   {"screening_status", to_string(screening_status)}};
  if (!reject_reason.empty()) j["reject_reason"] = reject_reason;
  return j;
}

Memory Memory::from_json(const nlohmann::json& j) {
  Memory m;
  m.memory_id = j.at("memory_id").get<std::string>();
  m.character_id = j.at("character_id").get<std::string>();
  m.chunk_id = j.at("chunk_id").get<std::string>();
  m.category = category_from_string(j.at("category").get<std::string>());
  m.text = j.at("text").get<std::string>();
  m.word_count = text::word_count(m.text);
  m.screening_status = screening_status_from_string(j.value("screening_status", "pending"));
  m.reject_reason = j.value("reject_reason", "");
  return m;
}

ParsedMemories parse_memory_block(const std::string& response) {
  ParsedMemories out;
  for (const auto& segment : text::split_blank_lines(response)) {
    bool ok = false;
    if (segment.front() == '[') {
      auto close = segment.find(']');
      if (close != std::string::npos) {
        auto category = category_from_label(segment.substr(1, close - 1));
        std::string body = text::collapse_whitespace(segment.substr(close + 1));
        if (category && !body.empty()) {
          out.items.emplace_back(*category, std::move(body));
          ok = true;
        }
      }
    }
    if (!ok) out.rejects.push_back(segment);
  }
  return out;
}

std::string serialize_memory_block(const std::vector<std::pair<MemoryCategory, std::string>>& items) {
  std::string out;
  for (const auto& [category, body] : items) {
    if (!out.empty()) out += "\n\n";
    out += "[" + category_label(category) + "] " + body;
  }
  return out;
}

std::string memory_generation_prompt(const TemplateSet& templates, const std::string& role_name,
                                     const std::string& memory_chunk) {
  return templates.get("memory_generation").render({{"role_name", role_name}, {"memory_chunk", memory_chunk}});
}

GeneratedMemories generate_memories(const Chunk& chunk, const std::string& role_name, Provider& provider,
                                    const std::string& endpoint_id, const TemplateSet& templates) {
  if (text::is_blank(chunk.text)) throw EmptyCorpus("chunk '" + chunk.chunk_id + "' is empty");
  auto prompt = memory_generation_prompt(templates, role_name, text::trim(chunk.text));
  auto exchange = provider.chat(endpoint_id, "", prompt);
  auto parsed = parse_memory_block(exchange.response_text);
  if (parsed.items.empty()) {
    std::string detail;
    for (const auto& r : parsed.rejects) detail += "\n  rejected: " + r;
    throw ParseFailure("no well-formed memory lines for chunk '" + chunk.chunk_id + "'" + detail, parsed.rejects);
  }
  GeneratedMemories out;
  out.rejects = std::move(parsed.rejects);
  int position = 0;
  for (auto& [category, body] : parsed.items) {
    Memory m;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "-m%02d", position++);
    m.memory_id = chunk.chunk_id + suffix;
    m.character_id = chunk.character_id;
    m.chunk_id = chunk.chunk_id;
    m.category = category;
    m.text = std::move(body);
    m.word_count = text::word_count(m.text);
    out.memories.push_back(std::move(m));
  }
  return out;
}

RuleFilterResult rule_filter(std::vector<Memory> memories) {
  RuleFilterResult out;
  for (auto& m : memories) {
    m.word_count = text::word_count(m.text);
    if (m.word_count >= kMemoryWordLimit) {
      m.screening_status = ScreeningStatus::rejected;
      m.reject_reason = "word_limit";
      out.rejected.push_back(std::move(m));
    } else if (!text::starts_first_person(m.text)) {
      m.screening_status = ScreeningStatus::rejected;
      m.reject_reason = "not_first_person";
      out.rejected.push_back(std::move(m));
    } else {
      out.kept.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace rolecheck
