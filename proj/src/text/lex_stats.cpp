#include "mags/text/lex_stats.hpp"

#include <unordered_set>

namespace mags::text {

namespace {
bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (is_word_char(c)) {
      current.push_back(lower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

LexStats lex_stats(std::string_view text) {
  const auto words = tokenize_words(text);
  std::unordered_set<std::string_view> distinct(words.begin(), words.end());
  LexStats s;
  s.total_words = words.size();
  s.unique_words = distinct.size();
  s.diversity = s.total_words == 0 ? 0.0 : static_cast<double>(s.unique_words) / static_cast<double>(s.total_words);
  return s;
}

}  // namespace mags::text
