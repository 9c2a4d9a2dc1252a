#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/ops.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/text/tokenizer.hpp"
#include "mqs/text/vocab.hpp"

namespace mqs::nn {

using ParamNodes = std::map<std::string, int>;

// Model staged onto a tape: every parameter becomes a leaf. Staged once per
// step and shared by all forwards on that tape.
template <typename T>
struct ModelOnTape {
  ModelConfig cfg;
  ParamNodes nodes;
  Mat<T> pe;  // sinusoidal table, kept off-tape (no gradient)

  int node(const std::string& path) const {
    auto it = nodes.find(path);
    MQS_CHECK(it != nodes.end(), StructuralError, "ModelOnTape: unknown path " + path);
    return it->second;
  }
};

template <typename T>
ModelOnTape<T> stage_model(Tape<T>& t, const ModelConfig& cfg,
                           const ModelParams<T>& params, bool trainable) {
  validate_params(cfg, params);
  ModelOnTape<T> m;
  m.cfg = cfg;
  m.pe = positional_encoding<T>(cfg.max_len, cfg.d_model);
  for (const auto& [path, w] : params) m.nodes[path] = t.leaf(w, trainable);
  return m;
}

// Stages just the encoder tower (embedding + encoder layers), for parameter
// maps holding only that slice — the frozen key encoder. Only encode() may be
// called on the result.
template <typename T>
ModelOnTape<T> stage_encoder(Tape<T>& t, const ModelConfig& cfg,
                             const ModelParams<T>& params, bool trainable) {
  std::size_t expected = 0;
  for (const auto& s : param_shapes(cfg)) {
    if (!is_encoder_path(s.path)) continue;
    ++expected;
    auto it = params.find(s.path);
    MQS_CHECK(it != params.end(), StructuralError,
              "stage_encoder: missing path " + s.path);
    MQS_CHECK(it->second.rows() == s.rows && it->second.cols() == s.cols, StructuralError,
              "stage_encoder: shape mismatch at " + s.path);
    MQS_CHECK(all_finite(it->second), NumericError,
              "stage_encoder: non-finite values at " + s.path);
  }
  MQS_CHECK(params.size() == expected, StructuralError,
            "stage_encoder: parameter map is not exactly the encoder slice");
  ModelOnTape<T> m;
  m.cfg = cfg;
  m.pe = positional_encoding<T>(cfg.max_len, cfg.d_model);
  for (const auto& [path, w] : params) m.nodes[path] = t.leaf(w, trainable);
  return m;
}

// Per-forward behavior switches. Dropout fires only in train mode with a
// nonzero rate; eval-mode forwards are bit-deterministic.
struct Forward {
  bool train = false;
  Rng* rng = nullptr;
};

namespace detail {

template <typename T>
int maybe_dropout(Tape<T>& t, int x, const ModelOnTape<T>& m, const Forward& fwd) {
  const double rate = m.cfg.dropout_rate;
  if (!fwd.train || rate <= 0.0) return x;
  MQS_CHECK(fwd.rng != nullptr, UsageError, "dropout: train mode needs an rng");
  const auto& v = t.value(x);
  Mat<T> mask(v.rows(), v.cols());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = fwd.rng->uniform() < rate ? T(0) : keep_scale;
  return mul_const(t, x, std::move(mask));
}

template <typename T>
int attention(Tape<T>& t, const ModelOnTape<T>& m, const std::string& prefix,
              int q_in, int kv_in, const Mat<T>* additive_mask = nullptr) {
  const int d = m.cfg.d_model;
  const int dh = d / m.cfg.n_heads;
  const int Q = add_row_broadcast(t, matmul(t, q_in, m.node(prefix + ".wq")),
                                  m.node(prefix + ".bq"));
  const int K = add_row_broadcast(t, matmul(t, kv_in, m.node(prefix + ".wk")),
                                  m.node(prefix + ".bk"));
  const int V = add_row_broadcast(t, matmul(t, kv_in, m.node(prefix + ".wv")),
                                  m.node(prefix + ".bv"));
  std::vector<int> heads;
  heads.reserve(static_cast<std::size_t>(m.cfg.n_heads));
  for (int h = 0; h < m.cfg.n_heads; ++h) {
    const int qh = slice_cols(t, Q, h * dh, dh);
    const int kh = slice_cols(t, K, h * dh, dh);
    const int vh = slice_cols(t, V, h * dh, dh);
    int scores = scale(t, matmul_nt(t, qh, kh), T(1) / std::sqrt(T(dh)));
    if (additive_mask) scores = add_const(t, scores, *additive_mask);
    heads.push_back(matmul(t, softmax_rows(t, scores), vh));
  }
  const int ctx = hstack(t, heads);
  return add_row_broadcast(t, matmul(t, ctx, m.node(prefix + ".wo")),
                           m.node(prefix + ".bo"));
}

template <typename T>
int ffn(Tape<T>& t, const ModelOnTape<T>& m, const std::string& prefix, int x) {
  const int h = add_row_broadcast(t, matmul(t, x, m.node(prefix + ".w1")),
                                  m.node(prefix + ".b1"));
  return add_row_broadcast(t, matmul(t, gelu(t, h), m.node(prefix + ".w2")),
                           m.node(prefix + ".b2"));
}

template <typename T>
int layernorm(Tape<T>& t, const ModelOnTape<T>& m, const std::string& prefix, int x) {
  return layernorm_rows(t, x, m.node(prefix + ".gain"), m.node(prefix + ".bias"));
}

// PAD positions are dropped before embedding, so padding can never leak into
// attention or pooling; positional rows follow the original indices.
template <typename T>
int embed_live(Tape<T>& t, const ModelOnTape<T>& m, const text::TokenSequence& seq,
               const char* who) {
  seq.validate();
  MQS_CHECK(seq.size() <= static_cast<std::size_t>(m.cfg.max_len), UsageError,
            std::string(who) + ": sequence longer than max_len");
  std::vector<int> ids;
  std::vector<int> positions;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!seq.mask[i]) continue;
    MQS_CHECK(seq.ids[i] >= 0 && seq.ids[i] < m.cfg.vocab_size, StructuralError,
              std::string(who) + ": token id outside vocabulary");
    ids.push_back(seq.ids[i]);
    positions.push_back(static_cast<int>(i));
  }
  const int x = scale(t, gather_rows(t, m.node("embed.tok"), ids),
                      std::sqrt(T(m.cfg.d_model)));
  Mat<T> pe_rows(static_cast<Eigen::Index>(positions.size()), m.cfg.d_model);
  for (std::size_t i = 0; i < positions.size(); ++i)
    pe_rows.row(static_cast<Eigen::Index>(i)) = m.pe.row(positions[i]);
  return add_const(t, x, pe_rows);
}

template <typename T>
Mat<T> causal_mask(Eigen::Index n) {
  Mat<T> mask = Mat<T>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) mask(i, j) = T(-1e30);
  return mask;
}

}  // namespace detail

template <typename T>
struct Encoded {
  int states = -1;  // live_len x d_model, final-layer states
  int pooled = -1;  // 1 x d_model mean over live positions
};

template <typename T>
Encoded<T> encode(Tape<T>& t, const ModelOnTape<T>& m, const text::TokenSequence& input,
                  const Forward& fwd = {}) {
  int x = detail::embed_live(t, m, input, "encode");
  x = detail::maybe_dropout(t, x, m, fwd);
  for (int i = 0; i < m.cfg.n_enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    const int h = detail::layernorm(t, m, p + ".ln1", x);
    x = add(t, x, detail::maybe_dropout(
                      t, detail::attention(t, m, p + ".attn", h, h), m, fwd));
    const int h2 = detail::layernorm(t, m, p + ".ln2", x);
    x = add(t, x, detail::maybe_dropout(t, detail::ffn(t, m, p + ".ffn", h2), m, fwd));
  }
  x = detail::layernorm(t, m, "enc.final_ln", x);
  Encoded<T> out;
  out.states = x;
  out.pooled = mean_rows(t, x);
  return out;
}

template <typename T>
struct Decoded {
  int states = -1;  // live_len x d_model, final-layer states
  int logits = -1;  // live_len x vocab (decode_teacher_forced only)
  int pooled = -1;  // 1 x d_model mean over live positions
};

// Runs the decoder over a BOS-led prefix against encoder states. Row i of the
// states aligns with prefix position i (which predicts the next token).
template <typename T>
Decoded<T> decode_states(Tape<T>& t, const ModelOnTape<T>& m, int enc_states,
                         const text::TokenSequence& prefix, const Forward& fwd = {}) {
  MQS_CHECK(!prefix.ids.empty() && prefix.ids[0] == text::Vocab::kBos, UsageError,
            "decode: target must begin with BOS");
  int x = detail::embed_live(t, m, prefix, "decode");
  x = detail::maybe_dropout(t, x, m, fwd);
  const Mat<T> mask = detail::causal_mask<T>(t.value(x).rows());
  for (int i = 0; i < m.cfg.n_dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    const int h1 = detail::layernorm(t, m, p + ".ln1", x);
    x = add(t, x, detail::maybe_dropout(
                      t, detail::attention(t, m, p + ".self", h1, h1, &mask), m, fwd));
    const int h2 = detail::layernorm(t, m, p + ".ln2", x);
    x = add(t, x, detail::maybe_dropout(
                      t, detail::attention(t, m, p + ".cross", h2, enc_states), m, fwd));
    const int h3 = detail::layernorm(t, m, p + ".ln3", x);
    x = add(t, x, detail::maybe_dropout(t, detail::ffn(t, m, p + ".ffn", h3), m, fwd));
  }
  x = detail::layernorm(t, m, "dec.final_ln", x);
  Decoded<T> out;
  out.states = x;
  out.pooled = mean_rows(t, x);
  return out;
}

// Teacher-forced pass: full logits per prefix position plus the pooled
// decoder representation.
template <typename T>
Decoded<T> decode_teacher_forced(Tape<T>& t, const ModelOnTape<T>& m, int enc_states,
                                 const text::TokenSequence& prefix,
                                 const Forward& fwd = {}) {
  Decoded<T> out = decode_states(t, m, enc_states, prefix, fwd);
  out.logits = add_row_broadcast(t, matmul(t, out.states, m.node("out.w")),
                                 m.node("out.b"));
  return out;
}

// Logits for a single decoder position (generation hot path).
template <typename T>
int project_logits_row(Tape<T>& t, const ModelOnTape<T>& m, int states, int row) {
  const int last = gather_rows(t, states, std::vector<int>{row});
  return add_row_broadcast(t, matmul(t, last, m.node("out.w")), m.node("out.b"));
}

}  // namespace mqs::nn
