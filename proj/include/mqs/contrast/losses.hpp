#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/ops.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::contrast {

// Weights and sizes of the contrastive machinery.
struct ContrastiveConfig {
  double tau = 0.07;
  std::size_t queue_capacity = 4096;
  std::size_t n_h = 64;
  double alpha = 1.0;
  double beta = 0.5;
  double momentum = 0.999;

  void validate() const {
    MQS_CHECK(tau > 0.0, ConfigError, "contrastive: tau must be > 0");
    MQS_CHECK(queue_capacity >= 1, ConfigError, "contrastive: queue capacity must be >= 1");
    MQS_CHECK(alpha >= 0.0, ConfigError, "contrastive: alpha must be >= 0");
    MQS_CHECK(beta >= 0.0, ConfigError, "contrastive: beta must be >= 0");
    MQS_CHECK(momentum >= 0.0 && momentum <= 1.0, ConfigError,
              "contrastive: momentum must lie in [0, 1]");
  }
};

template <typename T>
T cosine_sim(const nn::Mat<T>& a, const nn::Mat<T>& b) {
  MQS_CHECK(a.rows() == 1 && b.rows() == 1 && a.cols() == b.cols(), StructuralError,
            "cosine_sim: expected two 1 x d rows of equal width");
  const T na = a.norm();
  const T nb = b.norm();
  MQS_CHECK(na > T(1e-12) && nb > T(1e-12), NumericError,
            "cosine_sim: degenerate (near-zero) vector");
  return static_cast<T>((a.array() * b.array()).sum() / (na * nb));
}

// Reference InfoNCE on plain values: the positive sits inside the
// denominator, so the loss is always >= 0 and exactly 0 with no negatives.
template <typename T>
T info_nce(const nn::Mat<T>& anchor, const nn::Mat<T>& positive,
           const std::vector<nn::Mat<T>>& negatives, T tau) {
  MQS_CHECK(tau > T(0), ConfigError, "info_nce: tau must be > 0");
  std::vector<T> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(cosine_sim(anchor, positive) / tau);
  for (const auto& n : negatives) scores.push_back(cosine_sim(anchor, n) / tau);
  T m = scores[0];
  for (T s : scores) m = std::max(m, s);
  T sum = T(0);
  for (T s : scores) sum += std::exp(s - m);
  return m + std::log(sum) - scores[0];
}

// Normalizes every row to unit length (for representation banks used as
// constants in the tape-level loss).
template <typename T>
nn::Mat<T> l2_normalize_rows(const nn::Mat<T>& m) {
  nn::Mat<T> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const T norm = m.row(i).norm();
    MQS_CHECK(norm > T(1e-12), NumericError,
              "l2_normalize_rows: degenerate (near-zero) vector");
    out.row(i) = m.row(i) / norm;
  }
  return out;
}

// Differentiable InfoNCE: the anchor is a live 1 x d tape node; positive and
// negatives are detached values. Returns a scalar node.
template <typename T>
int info_nce_node(nn::Tape<T>& t, int anchor, const nn::Mat<T>& positive,
                  const nn::Mat<T>& negatives, T tau) {
  MQS_CHECK(tau > T(0), ConfigError, "info_nce: tau must be > 0");
  MQS_CHECK(positive.rows() == 1, StructuralError, "info_nce: positive must be 1 x d");
  nn::Mat<T> bank(1 + negatives.rows(), positive.cols());
  bank.row(0) = positive.row(0);
  if (negatives.rows() > 0) {
    MQS_CHECK(negatives.cols() == positive.cols(), StructuralError,
              "info_nce: negative width mismatch");
    bank.bottomRows(negatives.rows()) = negatives;
  }
  const int bank_node = t.constant(l2_normalize_rows(bank));
  const int a = nn::l2_normalize_row(t, anchor);
  const int scores = nn::scale(t, nn::matmul_nt(t, a, bank_node), T(1) / tau);
  const int lse = nn::logsumexp_all(t, scores);
  const int pos = nn::slice_cols(t, scores, 0, 1);
  return nn::add(t, lse, nn::scale(t, pos, T(-1)));
}

// All per-pair loss terms plus their weighted combination.
struct LossBundle {
  double ce = 0.0;
  double ctrCS = 0.0;  // question anchor vs queue negatives
  double ctrCH = 0.0;  // question anchor vs hard negatives
  double ctrGS = 0.0;  // summary anchor vs queue negatives
  double ctrGH = 0.0;  // summary anchor vs hard negatives
  double ctrC = 0.0;
  double ctrG = 0.0;
  double total = 0.0;
};

// Combines the five raw terms: ctrC = alpha*ctrCS + beta*ctrCH (likewise
// ctrG), total = ce + ctrC/2 + ctrG/2. With hard_mask=false (pair without an
// identifiable focus) the hard terms are dropped.
inline LossBundle compose_losses(double ce, double ctrCS, double ctrCH, double ctrGS,
                                 double ctrGH, const ContrastiveConfig& cfg,
                                 bool hard_mask = true) {
  cfg.validate();
  auto check_finite = [](double v, const char* name) {
    MQS_CHECK(std::isfinite(v), NumericError,
              std::string("compose_losses: non-finite ") + name);
  };
  check_finite(ce, "ce");
  check_finite(ctrCS, "ctrCS");
  check_finite(ctrCH, "ctrCH");
  check_finite(ctrGS, "ctrGS");
  check_finite(ctrGH, "ctrGH");
  LossBundle b;
  b.ce = ce;
  b.ctrCS = ctrCS;
  b.ctrGS = ctrGS;
  b.ctrCH = hard_mask ? ctrCH : 0.0;
  b.ctrGH = hard_mask ? ctrGH : 0.0;
  b.ctrC = cfg.alpha * b.ctrCS + cfg.beta * b.ctrCH;
  b.ctrG = cfg.alpha * b.ctrGS + cfg.beta * b.ctrGH;
  b.total = b.ce + 0.5 * b.ctrC + 0.5 * b.ctrG;
  return b;
}

}  // namespace mqs::contrast
