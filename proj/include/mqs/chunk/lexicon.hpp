#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/strings.hpp"

namespace mqs::chunk {

// Shallow POS tagset. Unknown tokens fall back to NOUN, which keeps content
// words (the usual focus carriers) inside noun phrases without a full tagger.
enum class PosTag { kDet, kAdj, kNoun, kVerb, kModal, kPrep, kWh, kOther };

inline const char* tag_name(PosTag t) {
  switch (t) {
    case PosTag::kDet: return "DT";
    case PosTag::kAdj: return "JJ";
    case PosTag::kNoun: return "NN";
    case PosTag::kVerb: return "VB";
    case PosTag::kModal: return "MD";
    case PosTag::kPrep: return "IN";
    case PosTag::kWh: return "WH";
    default: return "O";
  }
}

inline PosTag tag_from_name(const std::string& s) {
  if (s == "DT") return PosTag::kDet;
  if (s == "JJ") return PosTag::kAdj;
  if (s == "NN") return PosTag::kNoun;
  if (s == "VB") return PosTag::kVerb;
  if (s == "MD") return PosTag::kModal;
  if (s == "IN") return PosTag::kPrep;
  if (s == "WH") return PosTag::kWh;
  if (s == "O") return PosTag::kOther;
  throw ConfigError("lexicon: unknown POS tag \"" + s + "\"");
}

// Token -> POS map with NOUN fallback for unknown tokens.
class PosLexicon {
 public:
  PosTag tag(const std::string& token) const {
    if (!token.empty() && !std::isalnum(static_cast<unsigned char>(token[0]))) {
      return PosTag::kOther;  // punctuation
    }
    auto it = entries_.find(token);
    return it == entries_.end() ? PosTag::kNoun : it->second;
  }

  void set(const std::string& token, PosTag t) { entries_[to_lower(token)] = t; }

  std::size_t size() const { return entries_.size(); }

  // Plain-text format: one "token<TAB>tag" entry per line; '#' comments.
  static PosLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    PosLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto tab = t.find('\t');
      if (tab == std::string::npos) {
        throw IoError(path + ":" + std::to_string(line_no) + ": expected token<TAB>tag");
      }
      lex.set(trim(t.substr(0, tab)), tag_from_name(trim(t.substr(tab + 1))));
    }
    return lex;
  }

  // Built-in English function-word lexicon; content words rely on the NOUN
  // fallback. Pronouns are OTHER so they never seed noun phrases.
  static PosLexicon builtin() {
    PosLexicon lex;
    auto add = [&](std::initializer_list<const char*> toks, PosTag t) {
      for (const char* tok : toks) lex.set(tok, t);
    };
    add({"the", "a", "an", "this", "that", "these", "those", "my", "our",
         "your", "his", "her", "its", "their", "some", "any", "each", "every",
         "no"},
        PosTag::kDet);
    add({"what", "where", "when", "which", "who", "whom", "whose", "how",
         "why"},
        PosTag::kWh);
    add({"for", "on", "of", "in", "at", "from", "with", "about", "to",
         "since", "after", "before", "over", "under", "between", "during",
         "without", "into", "than", "as", "by"},
        PosTag::kPrep);
    add({"can", "could", "should", "would", "may", "might", "must", "will",
         "shall"},
        PosTag::kModal);
    add({"is", "are", "was", "were", "be", "been", "being", "am", "do",
         "does", "did", "have", "has", "had", "go", "goes", "going", "went",
         "get", "got", "give", "take", "treat", "find", "cure", "manage",
         "help", "advise", "suggest", "suffer", "suffers", "suffering",
         "complain", "complaining", "keep", "keeps", "say", "said", "tell",
         "told", "think", "know", "see", "work", "works", "worked", "read",
         "live", "lost", "stopped", "checked", "sounded", "talking", "worry",
         "feel", "feels", "need", "needs", "please", "prevented", "cause",
         "causes", "make", "makes", "want", "wants", "try", "tried"},
        PosTag::kVerb);
    add({"serious", "good", "bad", "old", "new", "worried", "awful", "tight",
         "negative", "clear", "local", "many", "much", "well", "far", "last",
         "next", "dry", "sore", "severe", "chronic", "mild"},
        PosTag::kAdj);
    add({"i", "we", "you", "he", "she", "it", "they", "me", "us", "him",
         "them", "and", "or", "but", "not", "so", "very", "too", "also",
         "there", "here", "now", "then", "again", "yet", "just", "only",
         "thank", "thanks", "hello", "hi", "yes", "if", "because", "while",
         "anything", "nothing", "something", "everything"},
        PosTag::kOther);
    return lex;
  }

 private:
  std::unordered_map<std::string, PosTag> entries_;
};

// Tokens that can never form a question focus on their own.
inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kSet = {
      "the", "a", "an", "this", "that", "these", "those", "my", "our", "your",
      "his", "her", "its", "their", "some", "any", "each", "every", "no",
      "what", "where", "when", "which", "who", "whom", "whose", "how", "why",
      "for", "on", "of", "in", "at", "from", "with", "about", "to", "since",
      "after", "before", "over", "under", "between", "during", "without",
      "into", "than", "as", "by", "can", "could", "should", "would", "may",
      "might", "must", "will", "shall", "is", "are", "was", "were", "be",
      "been", "being", "am", "do", "does", "did", "have", "has", "had", "i",
      "we", "you", "he", "she", "it", "they", "me", "us", "him", "them",
      "and", "or", "but", "not", "so", "very", "too", "also", "there",
      "here", "now", "then", "again", "yet", "just", "only", "if", "because",
      "while", "please", "old", "new", "last", "next", "good", "well",
      "much", "many",
  };
  return kSet;
}

inline bool is_stopword(const std::string& token) {
  if (token.empty()) return true;
  if (!std::isalnum(static_cast<unsigned char>(token[0]))) return true;  // punctuation
  return stopwords().count(token) > 0;
}

}  // namespace mqs::chunk
