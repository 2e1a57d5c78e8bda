#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rolecheck::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool is_blank(std::string_view s);

// Whitespace tokenization. This is the single word-count rule shared by
// memory filtering and dataset statistics.
std::vector<std::string> words(std::string_view s);
int word_count(std::string_view s);

// Splits on runs of blank lines; segments are trimmed, empty ones dropped.
std::vector<std::string> split_blank_lines(std::string_view s);

// Collapses every whitespace run (including newlines) to a single space.
std::string collapse_whitespace(std::string_view s);

// First-person check: trimmed text begins with the word "I" (I, I'm, I've ...).
bool starts_first_person(std::string_view s);

std::string slugify(std::string_view s);

std::string sha256_hex(std::string_view data);
// First 8 bytes of SHA-256, big-endian.
std::uint64_t sha256_u64(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace rolecheck::text
