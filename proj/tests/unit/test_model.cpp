#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "support/fd_check.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/ops.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/transformer.hpp"
#include "mqs/text/tokenizer.hpp"

using namespace mqs;
using namespace mqs::nn;
using mqs::text::TokenSequence;
using mqs::text::Vocab;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.vocab_size = 20;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.d_ff = 16;
  cfg.max_len = 12;
  return cfg;
}

TokenSequence seq_of(std::vector<text::TokenId> ids) {
  return text::make_sequence(std::move(ids));
}

}  // namespace

TEST_CASE("model config validation") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  SECTION("vocab must cover reserved ids") {
    cfg.vocab_size = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("heads must divide d_model") {
    cfg.n_heads = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("dropout rate below one") {
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("parameter shapes enumerate the full model") {
  const ModelConfig cfg = tiny_config();
  const auto shapes = param_shapes(cfg);
  // 1 embed + 22 per encoder layer... counted as: embed, enc layer
  // (2 ln1 + 8 attn + 2 ln2 + 4 ffn), enc final ln, dec layer
  // (2 + 8 + 2 + 8 + 2 + 4), dec final ln, out.w/out.b.
  CHECK(shapes.size() == 1 + 16 + 2 + 26 + 2 + 2);

  auto find = [&](const std::string& path) -> const ParamShape* {
    for (const auto& s : shapes)
      if (s.path == path) return &s;
    return nullptr;
  };
  const auto* emb = find("embed.tok");
  REQUIRE(emb != nullptr);
  CHECK(emb->rows == cfg.vocab_size);
  CHECK(emb->cols == cfg.d_model);
  const auto* w1 = find("enc.0.ffn.w1");
  REQUIRE(w1 != nullptr);
  CHECK(w1->rows == cfg.d_model);
  CHECK(w1->cols == cfg.d_ff);
  CHECK(find("dec.0.cross.wk") != nullptr);
  CHECK(find("dec.final_ln.bias") != nullptr);
  const auto* ow = find("out.w");
  REQUIRE(ow != nullptr);
  CHECK(ow->rows == cfg.d_model);
  CHECK(ow->cols == cfg.vocab_size);
}

TEST_CASE("init produces validated, sensible parameters") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 99);
  CHECK_NOTHROW(validate_params(cfg, params));
  CHECK(params.at("enc.0.ln1.gain") == Mat<double>::Ones(1, cfg.d_model));
  CHECK(params.at("enc.0.ln1.bias") == Mat<double>::Zero(1, cfg.d_model));
  CHECK(params.at("enc.0.attn.bq") == Mat<double>::Zero(1, cfg.d_model));
  CHECK(params.at("out.b") == Mat<double>::Zero(1, cfg.vocab_size));
  const auto& emb = params.at("embed.tok");
  CHECK(emb.cwiseAbs().maxCoeff() > 0.0);
  CHECK(emb.cwiseAbs().maxCoeff() < 0.2);  // draws are N(0, 0.02)
  // Same seed reproduces, different seed does not.
  CHECK(init_params<double>(cfg, 99).at("embed.tok") == emb);
  CHECK(init_params<double>(cfg, 100).at("embed.tok") != emb);
}

TEST_CASE("parameter validation catches drift") {
  const ModelConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 1);
  SECTION("missing path") {
    params.erase("out.w");
    CHECK_THROWS_AS(validate_params(cfg, params), StructuralError);
  }
  SECTION("extra path") {
    params.emplace("stray", Mat<double>::Zero(1, 1));
    CHECK_THROWS_AS(validate_params(cfg, params), StructuralError);
  }
  SECTION("wrong shape") {
    params.at("out.b") = Mat<double>::Zero(2, cfg.vocab_size);
    CHECK_THROWS_AS(validate_params(cfg, params), StructuralError);
  }
  SECTION("non-finite value") {
    params.at("embed.tok")(0, 0) = std::nan("");
    CHECK_THROWS_AS(validate_params(cfg, params), NumericError);
  }
}

TEST_CASE("encoder subset covers embedding plus encoder tower only") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 5);
  const auto sub = encoder_subset(params);
  CHECK(sub.count("embed.tok") == 1);
  CHECK(sub.count("enc.0.attn.wq") == 1);
  CHECK(sub.count("enc.final_ln.gain") == 1);
  CHECK(sub.count("dec.0.self.wq") == 0);
  CHECK(sub.count("out.w") == 0);
  std::size_t expect = 0;
  for (const auto& s : param_shapes(cfg))
    if (is_encoder_path(s.path)) ++expect;
  CHECK(sub.size() == expect);
  CHECK(sub.size() == 1 + 16 + 2);
}

TEST_CASE("positional encoding follows the sinusoid table") {
  const auto pe = positional_encoding<double>(6, 8);
  REQUIRE(pe.rows() == 6);
  REQUIRE(pe.cols() == 8);
  for (int i = 0; i < 8; i += 2) {
    CHECK(pe(0, i) == Catch::Approx(0.0).margin(1e-12));      // sin(0)
    CHECK(pe(0, i + 1) == Catch::Approx(1.0).margin(1e-12));  // cos(0)
  }
  CHECK(pe(1, 0) == Catch::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(pe(2, 2) == Catch::Approx(std::sin(2.0 / std::pow(10000.0, 2.0 / 8.0))).epsilon(1e-12));
  CHECK(pe(3, 5) == Catch::Approx(std::cos(3.0 / std::pow(10000.0, 4.0 / 8.0))).epsilon(1e-12));
}

TEST_CASE("encode pools the mean of live final states") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 7);
  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);

  SECTION("single live token pools to its own state") {
    const auto enc = encode(t, m, seq_of({5}));
    REQUIRE(t.value(enc.states).rows() == 1);
    CHECK(t.value(enc.pooled) == t.value(enc.states));
  }
  SECTION("pooled equals the column mean") {
    const auto enc = encode(t, m, seq_of({5, 9, 2, 11}));
    REQUIRE(t.value(enc.states).rows() == 4);
    Mat<double> mean = t.value(enc.states).colwise().mean();
    CHECK(t.value(enc.pooled).isApprox(mean, 1e-12));
  }
  SECTION("states are finite") {
    const auto enc = encode(t, m, seq_of({1, 2, 3, 4, 5, 6, 7, 8}));
    CHECK(all_finite(t.value(enc.states)));
  }
}

TEST_CASE("encode is deterministic in eval mode") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 3);
  const auto input = seq_of({4, 17, 9, 2});
  Mat<double> first;
  {
    Tape<double> t;
    t.set_grad_enabled(false);
    const auto m = stage_model(t, cfg, params, false);
    first = t.value(encode(t, m, input).pooled);
  }
  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  CHECK(t.value(encode(t, m, input).pooled) == first);
}

TEST_CASE("trailing padding never changes the forward pass") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 13);
  TokenSequence bare = seq_of({6, 3, 14});
  TokenSequence padded;
  padded.ids = {6, 3, 14, Vocab::kPad, Vocab::kPad, Vocab::kPad};
  padded.mask = {1, 1, 1, 0, 0, 0};

  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  const auto a = encode(t, m, bare);
  const auto b = encode(t, m, padded);
  CHECK(t.value(a.states) == t.value(b.states));
  CHECK(t.value(a.pooled) == t.value(b.pooled));

  const auto da = decode_states(t, m, a.states, seq_of({Vocab::kBos, 8, 9}));
  TokenSequence padded_prefix;
  padded_prefix.ids = {Vocab::kBos, 8, 9, Vocab::kPad};
  padded_prefix.mask = {1, 1, 1, 0};
  const auto db = decode_states(t, m, b.states, padded_prefix);
  CHECK(t.value(da.states) == t.value(db.states));
  CHECK(t.value(da.pooled) == t.value(db.pooled));
}

TEST_CASE("encode rejects over-length and malformed input") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 2);
  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  std::vector<text::TokenId> too_long(cfg.max_len + 1, 5);
  CHECK_THROWS_AS(encode(t, m, seq_of(too_long)), UsageError);
  TokenSequence bad;
  bad.ids = {5, 6};
  bad.mask = {1, 0};  // masked slot not PAD
  CHECK_THROWS_AS(encode(t, m, bad), StructuralError);
  CHECK_THROWS_AS(encode(t, m, seq_of({19, 1, 25})), StructuralError);  // id past vocab
}

TEST_CASE("decode contract: BOS-led prefix, per-position states") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 21);
  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  const auto enc = encode(t, m, seq_of({7, 12, 4}));

  SECTION("prefix must begin with BOS") {
    CHECK_THROWS_AS(decode_states(t, m, enc.states, seq_of({5, 6})), UsageError);
  }
  SECTION("BOS-only prefix pools to its single state") {
    const auto dec = decode_states(t, m, enc.states, seq_of({Vocab::kBos}));
    REQUIRE(t.value(dec.states).rows() == 1);
    CHECK(t.value(dec.pooled) == t.value(dec.states));
  }
  SECTION("teacher forcing emits one logits row per prefix position") {
    const auto dec = decode_teacher_forced(t, m, enc.states,
                                           seq_of({Vocab::kBos, 9, 15, 3}));
    REQUIRE(t.value(dec.logits).rows() == 4);
    REQUIRE(t.value(dec.logits).cols() == cfg.vocab_size);
    CHECK(all_finite(t.value(dec.logits)));
    // Single-row projection of the last position matches the full logits.
    const int last = project_logits_row(t, m, dec.states, 3);
    CHECK(t.value(last) == t.value(dec.logits).row(3));
  }
  SECTION("causal masking: extending the prefix preserves earlier states") {
    const auto short_dec = decode_states(t, m, enc.states, seq_of({Vocab::kBos, 9}));
    const auto long_dec =
        decode_states(t, m, enc.states, seq_of({Vocab::kBos, 9, 15, 3}));
    CHECK(t.value(long_dec.states).topRows(2) == t.value(short_dec.states));
  }
}

TEST_CASE("dropout only fires in train mode and needs an rng") {
  ModelConfig cfg = tiny_config();
  cfg.dropout_rate = 0.5;
  const auto params = init_params<double>(cfg, 31);
  const auto input = seq_of({4, 9, 2});

  Tape<double> t;
  t.set_grad_enabled(false);
  const auto m = stage_model(t, cfg, params, false);
  // Eval mode ignores the rate entirely.
  const auto a = encode(t, m, input);
  const auto b = encode(t, m, input);
  CHECK(t.value(a.pooled) == t.value(b.pooled));

  Forward train_fwd;
  train_fwd.train = true;
  CHECK_THROWS_AS(encode(t, m, input, train_fwd), UsageError);

  Rng rng1(5), rng2(5), rng3(6);
  train_fwd.rng = &rng1;
  const auto c = encode(t, m, input, train_fwd);
  Forward fwd2{true, &rng2};
  const auto d = encode(t, m, input, fwd2);
  CHECK(t.value(c.pooled) == t.value(d.pooled));  // same stream, same masks
  Forward fwd3{true, &rng3};
  const auto e = encode(t, m, input, fwd3);
  CHECK(t.value(e.pooled) != t.value(c.pooled));
}

TEST_CASE("full-model gradients match finite differences") {
  const ModelConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 42);
  const auto shapes = param_shapes(cfg);
  std::vector<Mat<double>> inputs;
  inputs.reserve(shapes.size());
  for (const auto& s : shapes) inputs.push_back(params.at(s.path));

  const auto source = seq_of({7, 12, 4, 16});
  const auto prefix = seq_of({Vocab::kBos, 9, 15, 3});
  const std::vector<int> targets = {9, 15, 3, Vocab::kEos};

  auto build = [&](Tape<double>& t, const std::vector<int>& in) {
    ModelOnTape<double> m;
    m.cfg = cfg;
    m.pe = positional_encoding<double>(cfg.max_len, cfg.d_model);
    for (std::size_t i = 0; i < shapes.size(); ++i) m.nodes[shapes[i].path] = in[i];
    const auto enc = encode(t, m, source);
    const auto dec = decode_teacher_forced(t, m, enc.states, prefix);
    // Mix in both pooled representations so pooling paths get checked too.
    const int pooled_term = matmul_nt(t, enc.pooled, dec.pooled);
    const int ce = cross_entropy_mean(t, dec.logits, targets);
    return add(t, ce, scale(t, pooled_term, 0.1));
  };

  const auto worst = fd::check_gradients(inputs, build, 77, 2);
  INFO("worst rel err " << worst.rel_err << " at input " << worst.input << " ("
                        << shapes[static_cast<std::size_t>(worst.input)].path << ") entry ("
                        << worst.row << "," << worst.col << ") analytic "
                        << worst.analytic << " numeric " << worst.numeric);
  CHECK(worst.rel_err < 1e-4);
}

TEST_CASE("frozen key-side forwards leave parameters without gradients") {
  const ModelConfig cfg = tiny_config();
  const auto query_params = init_params<double>(cfg, 51);
  const auto key_params = init_params<double>(cfg, 52);

  Tape<double> t;
  const auto qm = stage_model(t, cfg, query_params, true);
  t.set_grad_enabled(false);
  const auto km = stage_model(t, cfg, key_params, true);  // demoted anyway
  const auto key_enc = encode(t, km, seq_of({3, 8, 10}));
  t.set_grad_enabled(true);

  const auto query_enc = encode(t, qm, seq_of({7, 12, 4}));
  const int sim = matmul_nt(t, query_enc.pooled, key_enc.pooled);
  t.backward(sim);

  for (const auto& [path, node] : km.nodes) {
    CHECK_FALSE(t.requires_grad(node));
    CHECK(t.grad(node) == Mat<double>::Zero(t.value(node).rows(), t.value(node).cols()));
  }
  // The query encoder, by contrast, received real gradient signal.
  CHECK(t.grad(qm.node("embed.tok")).cwiseAbs().maxCoeff() > 0.0);
}
