#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/chunk/chunker.hpp"
#include "mqs/chunk/phrase_dict.hpp"

namespace mqs::chunk {

// Hard negatives for one pair: copies of the FAQ whose focus spans were
// replaced by same-label phrases.
struct HardNegativeSet {
  std::size_t source_pair_id = 0;
  std::vector<std::string> negatives;
};

// Builds n_h hard negatives by replacing every focus span with a uniformly
// drawn same-label phrase distinct from the original. Replacements may repeat
// across negatives. Returns nullopt when the pair has no usable focus (the
// caller then skips the hard contrastive terms).
inline std::optional<HardNegativeSet> generate_hard_negatives(
    const std::vector<std::string>& faq_tokens, const std::vector<Phrase>& focuses,
    const PhraseDictionary& dict, std::size_t n_h, std::uint64_t seed,
    std::size_t source_pair_id = 0) {
  if (focuses.empty()) return std::nullopt;
  for (std::size_t i = 0; i < focuses.size(); ++i) {
    MQS_CHECK(focuses[i].end <= faq_tokens.size() && focuses[i].start < focuses[i].end,
              StructuralError, "generate_hard_negatives: focus span out of bounds");
    if (i > 0) {
      MQS_CHECK(focuses[i].start >= focuses[i - 1].end, StructuralError,
                "generate_hard_negatives: focus spans must be disjoint and ordered");
    }
  }

  Rng rng(derive_seed(seed, "hard-negatives", source_pair_id));
  const std::string original_faq = join(faq_tokens);

  // Draws a same-label phrase != original, or nullopt if none exists.
  auto draw_replacement = [&](const Phrase& focus) -> std::optional<std::string> {
    const auto& pool = dict.phrases(focus.label);
    std::size_t skip = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i] == focus.text) {
        skip = i;
        break;
      }
    }
    const std::size_t usable = pool.size() - (skip < pool.size() ? 1 : 0);
    if (usable == 0) return std::nullopt;
    std::size_t d = rng.bounded(usable);
    if (skip < pool.size() && d >= skip) ++d;
    return pool[d];
  };

  constexpr int kMaxRetries = 8;
  HardNegativeSet out;
  out.source_pair_id = source_pair_id;
  out.negatives.reserve(n_h);
  bool warned = false;
  for (std::size_t k = 0; k < n_h; ++k) {
    std::string negative;
    bool any_replaced = false;
    for (int attempt = 0; attempt < kMaxRetries && !any_replaced; ++attempt) {
      std::vector<std::string> pieces;
      std::size_t cursor = 0;
      for (const Phrase& focus : focuses) {
        for (std::size_t i = cursor; i < focus.start; ++i) pieces.push_back(faq_tokens[i]);
        if (auto repl = draw_replacement(focus)) {
          pieces.push_back(*repl);
          any_replaced = true;
        } else {
          if (!warned) {
            std::cerr << "warning: no distinct same-label replacement for focus \""
                      << focus.text << "\"; span left unchanged\n";
            warned = true;
          }
          pieces.push_back(focus.text);
        }
        cursor = focus.end;
      }
      for (std::size_t i = cursor; i < faq_tokens.size(); ++i) pieces.push_back(faq_tokens[i]);
      negative = join(pieces);
    }
    if (!any_replaced) return std::nullopt;  // every focus stuck at its original
    out.negatives.push_back(std::move(negative));
  }
  return out;
}

}  // namespace mqs::chunk
