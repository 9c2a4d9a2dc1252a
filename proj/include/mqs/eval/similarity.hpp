#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqs/chunk/focus.hpp"
#include "mqs/chunk/hard_negatives.hpp"
#include "mqs/chunk/lexicon.hpp"
#include "mqs/chunk/phrase_dict.hpp"
#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/contrast/losses.hpp"
#include "mqs/nn/generate.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/transformer.hpp"
#include "mqs/text/corpus.hpp"
#include "mqs/text/tokenizer.hpp"
#include "mqs/text/vocab.hpp"

namespace mqs::eval {

// Mean cosine similarities between question/summary anchors and their
// reference targets, similar-question negatives, and focus-swapped hard
// negatives. Tracked per epoch to watch the representation space separate.
struct SimilarityRow {
  int epoch = 0;
  double s_c_faq_pos = 0.0;
  double s_c_sim_neg = 0.0;
  double s_c_hard_neg = 0.0;
  double s_g_faq_pos = 0.0;
  double s_g_sim_neg = 0.0;
  double s_g_hard_neg = 0.0;
};

inline constexpr const char* kSimilarityHeader =
    "epoch,s_c_faq_pos,s_c_sim_neg,s_c_hard_neg,s_g_faq_pos,s_g_sim_neg,s_g_hard_neg";

inline std::string format_row(const SimilarityRow& r) {
  return std::to_string(r.epoch) + "," + format_double(r.s_c_faq_pos) + "," +
         format_double(r.s_c_sim_neg) + "," + format_double(r.s_c_hard_neg) + "," +
         format_double(r.s_g_faq_pos) + "," + format_double(r.s_g_sim_neg) + "," +
         format_double(r.s_g_hard_neg);
}

// Model-independent inputs for the similarity analysis, prepared once and
// reused across checkpoints: token sequences, a fixed derangement pairing each
// question with somebody else's reference, and per-pair hard negatives.
struct AnalysisInputs {
  std::vector<text::TokenSequence> chq_seqs;
  std::vector<text::TokenSequence> faq_seqs;
  std::vector<std::size_t> sim_partner;
  std::vector<std::vector<text::TokenSequence>> hard_seqs;  // empty: no focus found
};

inline AnalysisInputs prepare_analysis_inputs(
    const std::vector<text::QAPair>& pairs, const text::Vocab& vocab,
    const nn::ModelConfig& cfg, std::size_t n_h, std::uint64_t seed,
    const chunk::PosLexicon& lexicon = chunk::PosLexicon::builtin()) {
  MQS_CHECK(pairs.size() >= 2, UsageError,
            "similarity analysis needs at least two pairs");
  AnalysisInputs in;
  const auto max_len = static_cast<std::size_t>(cfg.max_len);

  std::vector<std::vector<std::string>> faq_words(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    in.chq_seqs.push_back(text::tokenize(pairs[i].chq, vocab, max_len));
    in.faq_seqs.push_back(text::tokenize(pairs[i].faq, vocab, max_len - 1));
    faq_words[i] = text::normalize(pairs[i].faq);
  }

  Rng derange_rng(derive_seed(seed, "analysis-derange"));
  in.sim_partner = derange_rng.derangement(pairs.size());

  const auto dict = chunk::build_phrase_dictionary(faq_words, lexicon);
  const std::uint64_t neg_seed = derive_seed(seed, "analysis-negatives");
  in.hard_seqs.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto chq_words = text::normalize(pairs[i].chq);
    const auto focuses = chunk::identify_focus(chq_words, faq_words[i], lexicon);
    const auto negs =
        chunk::generate_hard_negatives(faq_words[i], focuses, dict, n_h, neg_seed, i);
    if (!negs) continue;
    for (const auto& neg : negs->negatives) {
      in.hard_seqs[i].push_back(text::tokenize(neg, vocab, max_len - 1));
    }
  }
  return in;
}

// Runs one checkpoint over the prepared inputs. All representations come from
// the served model itself: questions through the encoder, generated summaries
// through the decoder re-read over its own output prefix.
inline SimilarityRow similarity_row(const nn::ModelConfig& cfg,
                                    const nn::ModelParams<double>& params,
                                    const AnalysisInputs& in, int epoch) {
  const std::size_t n = in.chq_seqs.size();
  MQS_CHECK(n >= 2 && in.faq_seqs.size() == n && in.sim_partner.size() == n &&
                in.hard_seqs.size() == n,
            StructuralError, "similarity analysis inputs are misaligned");

  nn::Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = nn::stage_model(t, cfg, params, false);

  std::vector<nn::Mat<double>> r_c(n), r_f(n), r_g(n);
  std::vector<std::vector<nn::Mat<double>>> r_h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto enc = nn::encode(t, m, in.chq_seqs[i]);
    r_c[i] = t.value(enc.pooled);
    r_f[i] = t.value(nn::encode(t, m, in.faq_seqs[i]).pooled);
    for (const auto& seq : in.hard_seqs[i]) {
      r_h[i].push_back(t.value(nn::encode(t, m, seq).pooled));
    }

    auto ids = nn::generate_greedy(cfg, params, in.chq_seqs[i]);
    if (ids.size() > 1 && ids.back() == text::Vocab::kEos) ids.pop_back();
    const auto dec = nn::decode_states(t, m, enc.states, text::make_sequence(std::move(ids)));
    r_g[i] = t.value(dec.pooled);
  }

  SimilarityRow row;
  row.epoch = epoch;
  double hard_pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row.s_c_faq_pos += contrast::cosine_sim(r_c[i], r_f[i]);
    row.s_g_faq_pos += contrast::cosine_sim(r_g[i], r_f[i]);
    row.s_c_sim_neg += contrast::cosine_sim(r_c[i], r_f[in.sim_partner[i]]);
    row.s_g_sim_neg += contrast::cosine_sim(r_g[i], r_f[in.sim_partner[i]]);
    if (!r_h[i].empty()) {
      double c = 0.0, g = 0.0;
      for (const auto& h : r_h[i]) {
        c += contrast::cosine_sim(r_c[i], h);
        g += contrast::cosine_sim(r_g[i], h);
      }
      row.s_c_hard_neg += c / static_cast<double>(r_h[i].size());
      row.s_g_hard_neg += g / static_cast<double>(r_h[i].size());
      hard_pairs += 1.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  row.s_c_faq_pos *= inv;
  row.s_g_faq_pos *= inv;
  row.s_c_sim_neg *= inv;
  row.s_g_sim_neg *= inv;
  if (hard_pairs > 0.0) {
    row.s_c_hard_neg /= hard_pairs;
    row.s_g_hard_neg /= hard_pairs;
  }
  return row;
}

}  // namespace mqs::eval
