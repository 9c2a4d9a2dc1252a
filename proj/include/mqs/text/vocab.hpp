#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mqs/common/error.hpp"

namespace mqs::text {

using TokenId = std::int32_t;

// Token vocabulary with dense ids. Ids 0..3 are reserved.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  Vocab() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add_token(t);
  }

  // Adds a non-reserved token; returns its id (existing id if already present).
  TokenId add_token(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    TokenId id = static_cast<TokenId>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    return id;
  }

  TokenId id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
  }

  const std::string& token_of(TokenId id) const {
    MQS_CHECK(id >= 0 && static_cast<std::size_t>(id) < id_to_token_.size(),
              StructuralError, "Vocab::token_of: id out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id_to_token_.size(); }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  static bool is_reserved(TokenId id) { return id >= 0 && id <= 3; }

  // Rebuilds a vocab from a stored token list (ids follow list order).
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    MQS_CHECK(tokens.size() >= 4 && std::equal(v.id_to_token_.begin(), v.id_to_token_.end(),
                                               tokens.begin()),
              ConfigError, "vocab: token list does not start with the reserved tokens");
    for (std::size_t i = 4; i < tokens.size(); ++i) {
      const std::size_t before = v.size();
      v.add_token(tokens[i]);
      MQS_CHECK(v.size() == before + 1, ConfigError,
                "vocab: duplicate token in stored list: \"" + tokens[i] + "\"");
    }
    return v;
  }

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Builds a vocab from token frequency counts: every token with frequency
// >= min_freq gets an id, ordered by frequency desc then lexicographic.
inline Vocab build_vocab_from_counts(const std::map<std::string, std::size_t>& counts,
                                     std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> items;
  items.reserve(counts.size());
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq) items.emplace_back(tok, n);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, n] : items) v.add_token(tok);
  return v;
}

}  // namespace mqs::text
