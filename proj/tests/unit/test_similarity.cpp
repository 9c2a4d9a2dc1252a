#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mqs/eval/similarity.hpp"
#include "mqs/text/synth.hpp"

using namespace mqs;

namespace {

struct Setup {
  std::vector<text::QAPair> pairs;
  text::Vocab vocab;
  nn::ModelConfig cfg;
};

Setup make_setup() {
  text::SynthConfig sc = text::SynthConfig::defaults();
  sc.pair_count = 12;
  Setup s;
  s.pairs = text::synth_corpus(sc, 21);
  s.vocab = text::build_vocab(s.pairs, 1);
  s.cfg.vocab_size = static_cast<int>(s.vocab.size());
  s.cfg.d_model = 16;
  s.cfg.n_heads = 2;
  s.cfg.n_enc_layers = 1;
  s.cfg.n_dec_layers = 1;
  s.cfg.d_ff = 32;
  s.cfg.max_len = 24;
  return s;
}

}  // namespace

TEST_CASE("analysis inputs pair every question with someone else's reference") {
  const auto s = make_setup();
  const auto in = eval::prepare_analysis_inputs(s.pairs, s.vocab, s.cfg, 4, 5);
  REQUIRE(in.sim_partner.size() == s.pairs.size());
  for (std::size_t i = 0; i < in.sim_partner.size(); ++i) {
    CHECK(in.sim_partner[i] != i);
    CHECK(in.sim_partner[i] < s.pairs.size());
  }
  REQUIRE(in.chq_seqs.size() == s.pairs.size());
  REQUIRE(in.hard_seqs.size() == s.pairs.size());

  // Synthetic pairs carry a shared focus, so hard negatives exist throughout.
  std::size_t with_hard = 0;
  for (const auto& h : in.hard_seqs) {
    if (!h.empty()) {
      ++with_hard;
      CHECK(h.size() == 4);
    }
  }
  CHECK(with_hard == s.pairs.size());

  const auto again = eval::prepare_analysis_inputs(s.pairs, s.vocab, s.cfg, 4, 5);
  CHECK(again.sim_partner == in.sim_partner);

  const std::vector<text::QAPair> lonely(s.pairs.begin(), s.pairs.begin() + 1);
  CHECK_THROWS_AS(eval::prepare_analysis_inputs(lonely, s.vocab, s.cfg, 4, 5), UsageError);
}

TEST_CASE("similarity row yields bounded deterministic cosines") {
  const auto s = make_setup();
  const auto in = eval::prepare_analysis_inputs(s.pairs, s.vocab, s.cfg, 4, 5);
  const auto params = nn::init_params<double>(s.cfg, 31);

  const auto row = eval::similarity_row(s.cfg, params, in, 7);
  CHECK(row.epoch == 7);
  for (double v : {row.s_c_faq_pos, row.s_c_sim_neg, row.s_c_hard_neg, row.s_g_faq_pos,
                   row.s_g_sim_neg, row.s_g_hard_neg}) {
    CHECK(std::isfinite(v));
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  const auto again = eval::similarity_row(s.cfg, params, in, 7);
  CHECK(eval::format_row(again) == eval::format_row(row));

  const auto cells = eval::format_row(row);
  CHECK(cells.rfind("7,", 0) == 0);
  CHECK(std::string(eval::kSimilarityHeader) ==
        "epoch,s_c_faq_pos,s_c_sim_neg,s_c_hard_neg,s_g_faq_pos,s_g_sim_neg,s_g_hard_neg");
}
