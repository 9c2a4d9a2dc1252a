#pragma once

#include <string>
#include <vector>

#include "mqs/chunk/focus.hpp"
#include "mqs/common/error.hpp"
#include "mqs/text/tokenizer.hpp"

namespace mqs::eval {

// Fraction of gold focus phrases that appear as a contiguous token run in the
// corresponding generated summary. Counting is per focus phrase, so a pair
// carrying two phrases weighs twice as much as one carrying a single phrase;
// pairs without any gold phrase contribute nothing.
inline double focus_accuracy(const std::vector<std::vector<std::string>>& gold_phrases,
                             const std::vector<std::vector<std::string>>& generated_tokens) {
  MQS_CHECK(gold_phrases.size() == generated_tokens.size(), StructuralError,
            "focus_accuracy: gold/generated count mismatch");
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < gold_phrases.size(); ++i) {
    for (const std::string& phrase : gold_phrases[i]) {
      const std::vector<std::string> needle = text::normalize(phrase);
      if (needle.empty()) continue;
      ++total;
      if (chunk::contains_token_span(generated_tokens[i], needle)) ++hit;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace mqs::eval
