#pragma once

#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace llmrerank::text {

std::string_view trim(std::string_view s) noexcept;
/// The result would dangle.
template <typename S>
  requires std::is_same_v<S, std::string>
std::string_view trim(S&&) = delete;
std::vector<std::string> split(std::string_view s, char delimiter);
std::vector<std::string> words(std::string_view s);
std::size_t word_count(std::string_view s);
/// First `limit` whitespace-separated words joined by single spaces.
std::string first_words(std::string_view s, std::size_t limit);
std::string to_lower(std::string_view s);
/// Lowercase, drop punctuation, collapse whitespace. Used for title matching.
std::string normalize_title(std::string_view s);
/// Replaces CR/LF/TAB with spaces so a value stays on one line.
std::string single_line(std::string_view s);
bool iequals_prefix(std::string_view s, std::string_view prefix) noexcept;
std::string hex64(unsigned long long v);

}  // namespace llmrerank::text
