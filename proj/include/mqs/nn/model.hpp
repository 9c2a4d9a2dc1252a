#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::nn {

// Shape contract for the miniature encoder-decoder transformer.
struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 128;
  int max_len = 48;
  double dropout_rate = 0.0;

  void validate() const {
    MQS_CHECK(vocab_size >= 5, ConfigError, "model: vocab_size must cover the reserved ids");
    MQS_CHECK(d_model >= 1 && n_heads >= 1, ConfigError, "model: d_model and n_heads must be >= 1");
    MQS_CHECK(d_model % n_heads == 0, ConfigError, "model: d_model must be divisible by n_heads");
    MQS_CHECK(n_enc_layers >= 1 && n_dec_layers >= 1, ConfigError,
              "model: need at least one encoder and one decoder layer");
    MQS_CHECK(d_ff >= 1, ConfigError, "model: d_ff must be >= 1");
    MQS_CHECK(max_len >= 2, ConfigError, "model: max_len must be >= 2");
    MQS_CHECK(dropout_rate >= 0.0 && dropout_rate < 1.0, ConfigError,
              "model: dropout_rate must lie in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

// Parameters keyed by a stable path; std::map iteration gives the
// deterministic enumeration order that serialization and the optimizer rely
// on.
template <typename T>
using ModelParams = std::map<std::string, Mat<T>>;

struct ParamShape {
  std::string path;
  Eigen::Index rows;
  Eigen::Index cols;
};

// Every parameter path with its shape, in declaration order.
inline std::vector<ParamShape> param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab_size;
  std::vector<ParamShape> out;
  out.push_back({"embed.tok", v, d});
  auto attn = [&](const std::string& prefix) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) out.push_back({prefix + "." + w, d, d});
    for (const char* b : {"bq", "bk", "bv", "bo"}) out.push_back({prefix + "." + b, 1, d});
  };
  auto ln = [&](const std::string& prefix) {
    out.push_back({prefix + ".gain", 1, d});
    out.push_back({prefix + ".bias", 1, d});
  };
  auto ffn = [&](const std::string& prefix) {
    out.push_back({prefix + ".w1", d, ff});
    out.push_back({prefix + ".b1", 1, ff});
    out.push_back({prefix + ".w2", ff, d});
    out.push_back({prefix + ".b2", 1, d});
  };
  for (int i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    ln(p + ".ln1");
    attn(p + ".attn");
    ln(p + ".ln2");
    ffn(p + ".ffn");
  }
  ln("enc.final_ln");
  for (int i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    ln(p + ".ln1");
    attn(p + ".self");
    ln(p + ".ln2");
    attn(p + ".cross");
    ln(p + ".ln3");
    ffn(p + ".ffn");
  }
  ln("dec.final_ln");
  out.push_back({"out.w", d, v});
  out.push_back({"out.b", 1, v});
  return out;
}

// Gaussian init (std 0.02) for weights, zeros for biases, ones for layer-norm
// gains. Parameters are drawn in path declaration order from a seed-derived
// stream, so init is reproducible across builds.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model-init"));
  ModelParams<T> params;
  for (const auto& s : param_shapes(cfg)) {
    Mat<T> m(s.rows, s.cols);
    const bool is_gain = s.path.size() >= 5 && s.path.rfind(".gain") == s.path.size() - 5;
    const bool is_bias = (s.path.size() >= 5 && s.path.rfind(".bias") == s.path.size() - 5) ||
                         s.path.rfind(".b") != std::string::npos;
    if (is_gain) {
      m.setOnes();
    } else if (is_bias) {
      m.setZero();
    } else {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = static_cast<T>(rng.normal() * 0.02);
    }
    params.emplace(s.path, std::move(m));
  }
  return params;
}

// Fails fast on missing/extra paths or shape drift.
template <typename T>
void validate_params(const ModelConfig& cfg, const ModelParams<T>& params) {
  const auto shapes = param_shapes(cfg);
  MQS_CHECK(params.size() == shapes.size(), StructuralError,
            "model params: unexpected parameter count");
  for (const auto& s : shapes) {
    auto it = params.find(s.path);
    MQS_CHECK(it != params.end(), StructuralError, "model params: missing path " + s.path);
    MQS_CHECK(it->second.rows() == s.rows && it->second.cols() == s.cols, StructuralError,
              "model params: shape mismatch at " + s.path);
    MQS_CHECK(all_finite(it->second), NumericError,
              "model params: non-finite values at " + s.path);
  }
}

// True for parameters belonging to the encoder tower (the slice the momentum
// key encoder mirrors).
inline bool is_encoder_path(const std::string& path) {
  return path.rfind("embed.", 0) == 0 || path.rfind("enc.", 0) == 0;
}

template <typename T>
ModelParams<T> encoder_subset(const ModelParams<T>& params) {
  ModelParams<T> out;
  for (const auto& [path, m] : params) {
    if (is_encoder_path(path)) out.emplace(path, m);
  }
  return out;
}

// Fixed sinusoidal position table, rows 0..max_len-1.
template <typename T>
Mat<T> positional_encoding(int max_len, int d_model) {
  Mat<T> pe(max_len, d_model);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      const double angle = pos / std::pow(10000.0, double(i) / double(d_model));
      pe(pos, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < d_model) pe(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

}  // namespace mqs::nn
