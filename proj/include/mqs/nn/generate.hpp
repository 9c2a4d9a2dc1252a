#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/transformer.hpp"
#include "mqs/text/tokenizer.hpp"
#include "mqs/text/vocab.hpp"

namespace mqs::nn {

namespace detail {

// Argmax with lowest-token-id tie-break.
template <typename T>
int argmax_row(const Mat<T>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, best)) best = static_cast<int>(j);
  }
  return best;
}

template <typename T>
Eigen::Matrix<double, 1, Eigen::Dynamic> log_softmax_row(const Mat<T>& row) {
  Eigen::Matrix<double, 1, Eigen::Dynamic> r = row.template cast<double>();
  const double m = r.maxCoeff();
  const double lse = m + std::log((r.array() - m).exp().sum());
  return (r.array() - lse).matrix();
}

}  // namespace detail

// Greedy decode. Returns the full sequence including BOS and, when emitted
// before the length cap, the trailing EOS. Runs grad-free on a fresh tape.
template <typename T>
std::vector<text::TokenId> generate_greedy(const ModelConfig& cfg,
                                           const ModelParams<T>& params,
                                           const text::TokenSequence& source,
                                           int max_len = 0) {
  if (max_len <= 0) max_len = cfg.max_len;
  MQS_CHECK(max_len >= 1, UsageError, "generate: max_len must be >= 1");
  max_len = std::min(max_len, cfg.max_len);

  Tape<T> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  const auto enc = encode(t, m, source);

  std::vector<text::TokenId> ids = {text::Vocab::kBos};
  while (static_cast<int>(ids.size()) < max_len) {
    const auto dec = decode_states(t, m, enc.states, text::make_sequence(ids));
    const int logits = project_logits_row(
        t, m, dec.states, static_cast<int>(t.value(dec.states).rows()) - 1);
    const int next = detail::argmax_row(t.value(logits));
    ids.push_back(next);
    if (next == text::Vocab::kEos) break;
  }
  return ids;
}

// Beam search over cumulative log probability (no length normalization).
// Final ties prefer the hypothesis that emitted EOS earliest, then the
// lexicographically smallest token ids. beam_width=1 reproduces greedy.
template <typename T>
std::vector<text::TokenId> generate_beam(const ModelConfig& cfg,
                                         const ModelParams<T>& params,
                                         const text::TokenSequence& source,
                                         int beam_width, int max_len = 0) {
  MQS_CHECK(beam_width >= 1, UsageError, "generate: beam width must be >= 1");
  if (max_len <= 0) max_len = cfg.max_len;
  MQS_CHECK(max_len >= 1, UsageError, "generate: max_len must be >= 1");
  max_len = std::min(max_len, cfg.max_len);

  Tape<T> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  const auto enc = encode(t, m, source);

  struct Hyp {
    std::vector<text::TokenId> ids;
    double logp = 0.0;
    bool done = false;
    std::size_t done_step = std::numeric_limits<std::size_t>::max();
  };
  std::vector<Hyp> beam(1);
  beam[0].ids = {text::Vocab::kBos};

  for (std::size_t step = 0; ; ++step) {
    bool any_live = false;
    for (const auto& h : beam) any_live = any_live || !h.done;
    if (!any_live) break;

    std::vector<Hyp> candidates;
    for (const auto& h : beam) {
      if (h.done || static_cast<int>(h.ids.size()) >= max_len) {
        Hyp frozen = h;
        frozen.done = true;  // length cap without EOS
        candidates.push_back(std::move(frozen));
        continue;
      }
      const auto dec = decode_states(t, m, enc.states, text::make_sequence(h.ids));
      const int logits = project_logits_row(
          t, m, dec.states, static_cast<int>(t.value(dec.states).rows()) - 1);
      const auto lp = detail::log_softmax_row(t.value(logits));
      for (Eigen::Index v = 0; v < lp.cols(); ++v) {
        Hyp ext = h;
        ext.ids.push_back(static_cast<text::TokenId>(v));
        ext.logp += lp(0, v);
        if (v == text::Vocab::kEos) {
          ext.done = true;
          ext.done_step = step;
        } else if (static_cast<int>(ext.ids.size()) >= max_len) {
          ext.done = true;
        }
        candidates.push_back(std::move(ext));
      }
    }
    // In-search pruning ties break on token ids alone, which keeps
    // beam_width=1 exactly equal to greedy decoding.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) {
                       if (a.logp != b.logp) return a.logp > b.logp;
                       return a.ids < b.ids;
                     });
    if (candidates.size() > static_cast<std::size_t>(beam_width)) {
      candidates.resize(static_cast<std::size_t>(beam_width));
    }
    beam = std::move(candidates);
  }

  const Hyp* best = &beam[0];
  for (const auto& h : beam) {
    if (h.logp > best->logp ||
        (h.logp == best->logp &&
         (h.done_step < best->done_step ||
          (h.done_step == best->done_step && h.ids < best->ids)))) {
      best = &h;
    }
  }
  return best->ids;
}

}  // namespace mqs::nn
