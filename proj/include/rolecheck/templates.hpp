#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rolecheck {

using Bindings = std::map<std::string, std::string>;

// A prompt with `{name}` placeholders. Substitution is single-pass: bound
// values are inserted verbatim and never re-scanned.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, std::string text);

  const std::string& name() const noexcept { return name_; }
  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }
  std::string hash() const;

  // Throws UnfilledPlaceholder naming the first placeholder without a binding.
  std::string render(const Bindings& bindings) const;

 private:
  std::string name_;
  std::string text_;
  std::vector<std::string> placeholders_;
};

// Named template collection. Names are the file stems under templates/.
class TemplateSet {
 public:
  static TemplateSet builtin();
  // Starts from the built-in set and replaces every template that has a
  // matching <name>.txt file in `dir`.
  static TemplateSet load(const std::string& dir);

  const PromptTemplate& get(std::string_view name) const;
  std::vector<std::string> names() const;
  std::map<std::string, std::string> hashes() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// Placeholder names as they appear in text: `{identifier}` with
// identifier = [a-z0-9_]+.
std::vector<std::string> find_placeholders(std::string_view text);
bool has_unfilled_placeholder(std::string_view text);

}  // namespace rolecheck
