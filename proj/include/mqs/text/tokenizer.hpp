#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/text/vocab.hpp"

namespace mqs::text {

// Token ids plus a validity mask. Mask is false exactly at PAD positions.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return ids.size(); }

  std::size_t real_length() const {
    std::size_t n = 0;
    for (auto m : mask) n += (m != 0);
    return n;
  }

  void validate() const {
    MQS_CHECK(ids.size() == mask.size(), StructuralError,
              "TokenSequence: ids/mask length mismatch");
    std::size_t live = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (mask[i]) {
        ++live;
      } else {
        MQS_CHECK(ids[i] == Vocab::kPad, StructuralError,
                  "TokenSequence: masked-out position must hold PAD");
      }
    }
    MQS_CHECK(live >= 1, StructuralError, "TokenSequence: needs at least one live token");
  }
};

inline TokenSequence make_sequence(std::vector<TokenId> ids) {
  TokenSequence s;
  s.mask.assign(ids.size(), 1);
  s.ids = std::move(ids);
  s.validate();
  return s;
}

// Lowercase + whitespace split; punctuation characters become single-char
// tokens. No subword handling.
inline std::vector<std::string> normalize(std::string_view text) {
  std::string lowered = to_lower(text);
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : lowered) {
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      word.push_back(static_cast<char>(c));
    } else {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return out;
}

// Maps text to ids, truncating to max_len with EOS always the last token.
// Out-of-vocabulary tokens map to UNK.
inline TokenSequence tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  MQS_CHECK(max_len >= 1, StructuralError, "tokenize: max_len must be >= 1");
  std::vector<std::string> words = normalize(text);
  if (words.empty()) {
    throw UsageError("tokenize: text is empty after normalization");
  }
  std::vector<TokenId> ids;
  ids.reserve(words.size() + 1);
  for (const auto& w : words) ids.push_back(vocab.id_of(w));
  if (ids.size() + 1 > max_len) ids.resize(max_len - 1);
  ids.push_back(Vocab::kEos);
  return make_sequence(std::move(ids));
}

// Inverse of tokenize for display/scoring: drops reserved tokens.
inline std::vector<std::string> detokenize(const std::vector<TokenId>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (Vocab::is_reserved(id)) continue;
    out.push_back(vocab.token_of(id));
  }
  return out;
}

}  // namespace mqs::text
