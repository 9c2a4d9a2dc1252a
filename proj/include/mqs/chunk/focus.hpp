#pragma once

#include <string>
#include <vector>

#include "mqs/common/strings.hpp"
#include "mqs/chunk/chunker.hpp"
#include "mqs/chunk/lexicon.hpp"

namespace mqs::chunk {

// True if `needle` occurs as a contiguous token run inside `haystack`.
inline bool contains_token_span(const std::vector<std::string>& haystack,
                                const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (haystack[i + j] != needle[j]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

inline bool all_stopwords(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    if (!is_stopword(t)) return false;
  }
  return true;
}

// Question-focus identification by CHQ/FAQ overlap: FAQ phrases (label != O,
// not stopword-only) whose text appears verbatim in the CHQ token stream.
// Returned phrases carry FAQ spans. Empty result means no focus was found.
inline std::vector<Phrase> identify_focus(const std::vector<std::string>& chq_tokens,
                                          const std::vector<std::string>& faq_tokens,
                                          const PosLexicon& lexicon) {
  std::vector<Phrase> focuses;
  for (const Phrase& p : chunk(faq_tokens, lexicon)) {
    if (p.label == ChunkLabel::kO) continue;
    std::vector<std::string> span(faq_tokens.begin() + static_cast<std::ptrdiff_t>(p.start),
                                  faq_tokens.begin() + static_cast<std::ptrdiff_t>(p.end));
    if (all_stopwords(span)) continue;
    if (contains_token_span(chq_tokens, span)) focuses.push_back(p);
  }
  return focuses;
}

}  // namespace mqs::chunk
