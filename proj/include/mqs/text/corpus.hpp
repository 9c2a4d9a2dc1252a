#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqs/common/error.hpp"
#include "mqs/text/tokenizer.hpp"
#include "mqs/text/vocab.hpp"

namespace mqs::text {

// One CHQ/FAQ training pair. CHQ is the long consumer question, FAQ the short
// reference summary. gold_focuses is populated for synthetic data only.
struct QAPair {
  std::string chq;
  std::string faq;
  TokenSequence chq_tokens;
  TokenSequence faq_tokens;
  std::optional<std::vector<std::string>> gold_focuses;

  bool operator==(const QAPair& o) const {
    return chq == o.chq && faq == o.faq && gold_focuses == o.gold_focuses;
  }
};

// Reads a JSON Lines corpus: one object per line with string keys "chq" and
// "faq", optional "focuses" (list of strings). Malformed lines are reported
// with their 1-based line number.
inline std::vector<QAPair> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<QAPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    auto require_string = [&](const char* key) -> std::string {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw IoError(path + ":" + std::to_string(line_no) +
                      ": missing or non-string field \"" + key + "\"");
      }
      return obj[key].get<std::string>();
    };
    QAPair p;
    p.chq = require_string("chq");
    p.faq = require_string("faq");
    if (p.chq.empty() || p.faq.empty()) {
      throw IoError(path + ":" + std::to_string(line_no) + ": empty chq or faq");
    }
    if (obj.contains("focuses")) {
      if (!obj["focuses"].is_array()) {
        throw IoError(path + ":" + std::to_string(line_no) + ": \"focuses\" must be a list");
      }
      p.gold_focuses = obj["focuses"].get<std::vector<std::string>>();
    }
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) {
    std::cerr << "warning: corpus " << path << " is empty\n";
  }
  return pairs;
}

inline void save_pairs(const std::vector<QAPair>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open corpus file for writing: " + path);
  for (const auto& p : pairs) {
    nlohmann::json obj;
    obj["chq"] = p.chq;
    obj["faq"] = p.faq;
    if (p.gold_focuses) obj["focuses"] = *p.gold_focuses;
    out << obj.dump() << "\n";
  }
  if (!out) throw IoError("error writing corpus file: " + path);
}

// Frequency counts over the normalized CHQ and FAQ token streams.
inline std::map<std::string, std::size_t> token_counts(const std::vector<QAPair>& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : corpus) {
    for (const auto& t : normalize(p.chq)) ++counts[t];
    for (const auto& t : normalize(p.faq)) ++counts[t];
  }
  return counts;
}

inline Vocab build_vocab(const std::vector<QAPair>& corpus, std::size_t min_freq) {
  MQS_CHECK(!corpus.empty(), UsageError, "build_vocab: corpus is empty");
  return build_vocab_from_counts(token_counts(corpus), min_freq);
}

// Fills in chq_tokens/faq_tokens for every pair.
inline void tokenize_pairs(std::vector<QAPair>& pairs, const Vocab& vocab, std::size_t max_len) {
  for (auto& p : pairs) {
    p.chq_tokens = tokenize(p.chq, vocab, max_len);
    // Targets get BOS prepended later; leave room so BOS + ids still fits.
    p.faq_tokens = tokenize(p.faq, vocab, max_len - 1);
  }
}

}  // namespace mqs::text
