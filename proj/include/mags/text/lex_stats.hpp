#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mags::text {

struct LexStats {
  std::size_t total_words = 0;
  std::size_t unique_words = 0;  // N_u
  double diversity = 0.0;        // f_d = unique / total, 0 for empty text

  friend bool operator==(const LexStats&, const LexStats&) = default;
};

// Lowercased ASCII alphanumeric runs; everything else (punctuation, spaces,
// non-ASCII bytes) separates words.
std::vector<std::string> tokenize_words(std::string_view text);

LexStats lex_stats(std::string_view text);

}  // namespace mags::text
