#pragma once

#include <cmath>
#include <cstdint>

#include "mqs/common/error.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::train {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm ceiling; <= 0 disables

  void validate() const {
    MQS_CHECK(learning_rate > 0.0, ConfigError, "adam: learning rate must be > 0");
    MQS_CHECK(beta1 >= 0.0 && beta1 < 1.0, ConfigError, "adam: beta1 must lie in [0, 1)");
    MQS_CHECK(beta2 >= 0.0 && beta2 < 1.0, ConfigError, "adam: beta2 must lie in [0, 1)");
    MQS_CHECK(eps > 0.0, ConfigError, "adam: eps must be > 0");
  }
};

// L2 norm over every entry of every tensor in the map.
template <typename T>
T global_grad_norm(const nn::ModelParams<T>& grads) {
  T sq = T(0);
  for (const auto& [path, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

// Scales all gradients in place so their global norm is at most `max_norm`.
// Returns the pre-clip norm.
template <typename T>
T clip_global_norm(nn::ModelParams<T>& grads, T max_norm) {
  const T norm = global_grad_norm(grads);
  if (max_norm > T(0) && norm > max_norm) {
    const T s = max_norm / norm;
    for (auto& [path, g] : grads) g *= s;
  }
  return norm;
}

// Adam with bias correction. Moment tensors mirror the parameter map and are
// exposed so training state can round-trip through checkpoints exactly.
template <typename T>
class Adam {
 public:
  Adam(const AdamConfig& cfg, const nn::ModelParams<T>& params) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& [path, p] : params) {
      m_.emplace(path, nn::Mat<T>::Zero(p.rows(), p.cols()));
      v_.emplace(path, nn::Mat<T>::Zero(p.rows(), p.cols()));
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }
  const nn::ModelParams<T>& first_moments() const { return m_; }
  const nn::ModelParams<T>& second_moments() const { return v_; }

  // Restores optimizer state from a checkpoint.
  void restore(std::uint64_t step, nn::ModelParams<T> m, nn::ModelParams<T> v) {
    MQS_CHECK(m.size() == m_.size() && v.size() == v_.size(), StructuralError,
              "adam restore: moment count mismatch");
    for (const auto& [path, cur] : m_) {
      auto it = m.find(path);
      MQS_CHECK(it != m.end(), StructuralError, "adam restore: missing moment " + path);
      MQS_CHECK(it->second.rows() == cur.rows() && it->second.cols() == cur.cols(),
                StructuralError, "adam restore: moment shape mismatch at " + path);
    }
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  // One update. Gradients are taken by value because the global-norm clip
  // mutates them.
  void step(nn::ModelParams<T>& params, nn::ModelParams<T> grads) {
    MQS_CHECK(params.size() == m_.size() && grads.size() == m_.size(), StructuralError,
              "adam: parameter/gradient map does not match optimizer state");
    clip_global_norm(grads, static_cast<T>(cfg_.clip_norm));
    ++step_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T corr1 = T(1) - std::pow(b1, static_cast<T>(step_));
    const T corr2 = T(1) - std::pow(b2, static_cast<T>(step_));
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.eps);
    for (auto& [path, p] : params) {
      auto gi = grads.find(path);
      MQS_CHECK(gi != grads.end(), StructuralError, "adam: missing gradient for " + path);
      const auto& g = gi->second;
      MQS_CHECK(g.rows() == p.rows() && g.cols() == p.cols(), StructuralError,
                "adam: gradient shape mismatch at " + path);
      MQS_CHECK(nn::all_finite(g), NumericError, "adam: non-finite gradient at " + path);
      auto& m = m_.at(path);
      auto& v = v_.at(path);
      m = b1 * m + (T(1) - b1) * g;
      v = (b2 * v.array() + (T(1) - b2) * g.array().square()).matrix();
      const auto mhat = (m.array() / corr1).eval();
      const auto vhat = (v.array() / corr2).eval();
      p.array() -= lr * mhat / (vhat.sqrt() + eps);
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  nn::ModelParams<T> m_, v_;
};

}  // namespace mqs::train
