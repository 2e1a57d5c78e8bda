#include "rolecheck/templates.hpp"

#include <filesystem>

#include "rolecheck/embedded_assets.hpp"
#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

namespace {

bool ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Length of the placeholder starting at text[i] == '{', or 0.
size_t placeholder_len(std::string_view text, size_t i) {
  size_t j = i + 1;
  while (j < text.size() && ident_char(text[j])) ++j;
  if (j == i + 1 || j >= text.size() || text[j] != '}') return 0;
  return j - i + 1;
}

}  // namespace

std::vector<std::string> find_placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    if (size_t len = placeholder_len(text, i)) {
      out.emplace_back(text.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

bool has_unfilled_placeholder(std::string_view text) { return !find_placeholders(text).empty(); }

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {
  for (auto& p : find_placeholders(text_)) {
    if (std::find(placeholders_.begin(), placeholders_.end(), p) == placeholders_.end())
      placeholders_.push_back(std::move(p));
  }
}

std::string PromptTemplate::hash() const { return text::sha256_hex(text_); }

std::string PromptTemplate::render(const Bindings& bindings) const {
  std::string out;
  out.reserve(text_.size() * 2);
  std::string_view src = text_;
  size_t i = 0;
  while (i < src.size()) {
    if (src[i] == '{') {
      if (size_t len = placeholder_len(src, i)) {
        std::string key(src.substr(i + 1, len - 2));
        auto it = bindings.find(key);
        if (it == bindings.end())
          throw UnfilledPlaceholder("template '" + name_ + "' has no value for {" + key + "}");
        out += it->second;
        i += len;
        continue;
      }
    }
    out += src[i++];
  }
  return out;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& [name, body] : assets::builtin_templates()) {
    set.templates_.emplace(name, PromptTemplate(name, body));
  }
  return set;
}

TemplateSet TemplateSet::load(const std::string& dir) {
  TemplateSet set = builtin();
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template_dir '" + dir + "' is not a directory");
  for (const auto& [name, tpl] : set.templates_) {
    auto path = std::filesystem::path(dir) / (name + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::string body = text::read_file(path.string());
    if (!body.empty() && body.back() == '\n') body.pop_back();
    set.templates_.insert_or_assign(name, PromptTemplate(name, body));
  }
  return set;
}

const PromptTemplate& TemplateSet::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown template '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, tpl] : templates_) out.push_back(name);
  return out;
}

std::map<std::string, std::string> TemplateSet::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, tpl] : templates_) out[name] = tpl.hash();
  return out;
}

}  // namespace rolecheck
