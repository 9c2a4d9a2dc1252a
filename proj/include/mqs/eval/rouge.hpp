#pragma once

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"

namespace mqs::eval {

// Precision/recall/F1 triple on a 0..100 scale.
struct RougeTriple {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;
};

struct RougeScore {
  RougeTriple r1;  // unigram overlap
  RougeTriple r2;  // bigram overlap
  RougeTriple rl;  // longest common subsequence
};

namespace rouge_detail {

inline void warn_empty_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "warning: scoring an empty candidate or reference; "
                 "such pairs count as zero\n";
  }
}

inline std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return counts;
}

inline RougeTriple from_overlap(double overlap, double cand_total, double ref_total) {
  RougeTriple t;
  if (cand_total <= 0.0 || ref_total <= 0.0) return t;
  t.p = 100.0 * overlap / cand_total;
  t.r = 100.0 * overlap / ref_total;
  if (t.p + t.r > 0.0) t.f = 2.0 * t.p * t.r / (t.p + t.r);
  return t;
}

}  // namespace rouge_detail

// Clipped n-gram overlap: each candidate n-gram is credited at most as often
// as it occurs in the reference.
inline RougeTriple rouge_n(const std::vector<std::string>& candidate,
                           const std::vector<std::string>& reference, std::size_t n) {
  MQS_CHECK(n >= 1, UsageError, "rouge_n: order must be >= 1");
  if (candidate.empty() || reference.empty()) {
    rouge_detail::warn_empty_once();
    return {};
  }
  const auto cand = rouge_detail::ngram_counts(candidate, n);
  const auto ref = rouge_detail::ngram_counts(reference, n);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [gram, c] : cand) {
    cand_total += c;
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [gram, c] : ref) ref_total += c;
  return rouge_detail::from_overlap(overlap, cand_total, ref_total);
}

// Classic O(m*n) dynamic program for the longest common subsequence length.
inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Sequence-level overlap via the longest common subsequence, plain F1.
inline RougeTriple rouge_l(const std::vector<std::string>& candidate,
                           const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) {
    rouge_detail::warn_empty_once();
    return {};
  }
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  return rouge_detail::from_overlap(lcs, static_cast<double>(candidate.size()),
                                    static_cast<double>(reference.size()));
}

inline RougeScore rouge_score(const std::vector<std::string>& candidate,
                              const std::vector<std::string>& reference) {
  RougeScore s;
  s.r1 = rouge_n(candidate, reference, 1);
  s.r2 = rouge_n(candidate, reference, 2);
  s.rl = rouge_l(candidate, reference);
  return s;
}

// Mean of per-pair scores over a parallel candidate/reference corpus.
inline RougeScore rouge_corpus(const std::vector<std::vector<std::string>>& candidates,
                               const std::vector<std::vector<std::string>>& references) {
  MQS_CHECK(candidates.size() == references.size(), StructuralError,
            "rouge_corpus: candidate/reference count mismatch");
  MQS_CHECK(!candidates.empty(), UsageError, "rouge_corpus: nothing to score");
  RougeScore mean;
  auto acc = [](RougeTriple& into, const RougeTriple& t) {
    into.p += t.p;
    into.r += t.r;
    into.f += t.f;
  };
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const RougeScore s = rouge_score(candidates[i], references[i]);
    acc(mean.r1, s.r1);
    acc(mean.r2, s.r2);
    acc(mean.rl, s.rl);
  }
  const double n = static_cast<double>(candidates.size());
  for (RougeTriple* t : {&mean.r1, &mean.r2, &mean.rl}) {
    t->p /= n;
    t->r /= n;
    t->f /= n;
  }
  return mean;
}

}  // namespace mqs::eval
