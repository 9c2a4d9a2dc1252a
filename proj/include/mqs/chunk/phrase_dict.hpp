#pragma once

#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/chunk/chunker.hpp"

namespace mqs::chunk {

// Label-keyed pool of phrases harvested from training-set FAQs. Lists are
// deduplicated and kept in first-seen order so draws are reproducible.
class PhraseDictionary {
 public:
  void add(ChunkLabel label, const std::string& phrase) {
    auto& seen = seen_[label];
    if (seen.insert(phrase).second) by_label_[label].push_back(phrase);
  }

  const std::vector<std::string>& phrases(ChunkLabel label) const {
    static const std::vector<std::string> kEmpty;
    auto it = by_label_.find(label);
    return it == by_label_.end() ? kEmpty : it->second;
  }

  std::size_t total_phrases() const {
    std::size_t n = 0;
    for (const auto& [label, list] : by_label_) n += list.size();
    return n;
  }

  bool contains(ChunkLabel label, const std::string& phrase) const {
    auto it = seen_.find(label);
    return it != seen_.end() && it->second.count(phrase) > 0;
  }

 private:
  std::map<ChunkLabel, std::vector<std::string>> by_label_;
  std::map<ChunkLabel, std::unordered_set<std::string>> seen_;
};

// Harvests every non-O phrase of every training FAQ into the dictionary.
inline PhraseDictionary build_phrase_dictionary(
    const std::vector<std::vector<std::string>>& train_faqs, const PosLexicon& lexicon) {
  MQS_CHECK(!train_faqs.empty(), UsageError, "build_phrase_dictionary: empty training set");
  PhraseDictionary dict;
  for (const auto& faq : train_faqs) {
    for (const Phrase& p : chunk(faq, lexicon)) {
      if (p.label == ChunkLabel::kO) continue;
      dict.add(p.label, p.text);
    }
  }
  return dict;
}

}  // namespace mqs::chunk
