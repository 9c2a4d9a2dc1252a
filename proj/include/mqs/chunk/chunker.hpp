#pragma once

#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/chunk/lexicon.hpp"

namespace mqs::chunk {

enum class ChunkLabel { kNp, kVp, kPp, kAdjp, kO };

inline const char* label_name(ChunkLabel l) {
  switch (l) {
    case ChunkLabel::kNp: return "NP";
    case ChunkLabel::kVp: return "VP";
    case ChunkLabel::kPp: return "PP";
    case ChunkLabel::kAdjp: return "ADJP";
    default: return "O";
  }
}

inline ChunkLabel label_from_name(const std::string& s) {
  if (s == "NP") return ChunkLabel::kNp;
  if (s == "VP") return ChunkLabel::kVp;
  if (s == "PP") return ChunkLabel::kPp;
  if (s == "ADJP") return ChunkLabel::kAdjp;
  if (s == "O") return ChunkLabel::kO;
  throw ConfigError("unknown chunk label \"" + s + "\"");
}

// A contiguous token span with its chunk label. Offsets index the source
// token list; text is the space-joined span.
struct Phrase {
  std::string text;
  ChunkLabel label = ChunkLabel::kO;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  std::size_t length() const { return end - start; }
};

// Greedy longest-match shallow chunker over POS tags:
//   NP := DT? JJ* NN+     VP := MD? VB+     PP := IN     remainder -> O
// Phrases partition the sentence; output is deterministic.
inline std::vector<Phrase> chunk(const std::vector<std::string>& tokens,
                                 const PosLexicon& lexicon) {
  MQS_CHECK(!tokens.empty(), UsageError, "chunk: empty sentence");
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(lexicon.tag(t));

  std::vector<Phrase> phrases;
  auto emit = [&](std::size_t start, std::size_t end, ChunkLabel label) {
    Phrase p;
    p.start = start;
    p.end = end;
    p.label = label;
    p.text = tokens[start];
    for (std::size_t i = start + 1; i < end; ++i) {
      p.text += " ";
      p.text += tokens[i];
    }
    phrases.push_back(std::move(p));
  };

  std::size_t i = 0;
  const std::size_t n = tokens.size();
  while (i < n) {
    // NP := DT? JJ* NN+
    {
      std::size_t j = i;
      if (j < n && tags[j] == PosTag::kDet) ++j;
      while (j < n && tags[j] == PosTag::kAdj) ++j;
      std::size_t nouns = 0;
      while (j < n && tags[j] == PosTag::kNoun) {
        ++j;
        ++nouns;
      }
      if (nouns > 0) {
        emit(i, j, ChunkLabel::kNp);
        i = j;
        continue;
      }
    }
    // VP := MD? VB+
    {
      std::size_t j = i;
      if (j < n && tags[j] == PosTag::kModal) ++j;
      std::size_t verbs = 0;
      while (j < n && tags[j] == PosTag::kVerb) {
        ++j;
        ++verbs;
      }
      if (verbs > 0) {
        emit(i, j, ChunkLabel::kVp);
        i = j;
        continue;
      }
    }
    // PP := IN
    if (tags[i] == PosTag::kPrep) {
      emit(i, i + 1, ChunkLabel::kPp);
      ++i;
      continue;
    }
    emit(i, i + 1, ChunkLabel::kO);
    ++i;
  }
  return phrases;
}

}  // namespace mqs::chunk
