#pragma once

#include "mqs/common/error.hpp"
#include "mqs/nn/model.hpp"

namespace mqs::contrast {

// Exponential-moving-average update of the frozen key encoder:
// each key tensor <- m * key + (1-m) * query. Only paths present in `key`
// are touched (the key holds just the encoder slice), and the query side is
// never modified.
template <typename T>
void momentum_update(nn::ModelParams<T>& key, const nn::ModelParams<T>& query, T m) {
  MQS_CHECK(m >= T(0) && m <= T(1), ConfigError,
            "momentum_update: coefficient must lie in [0, 1]");
  for (auto& [path, k] : key) {
    auto it = query.find(path);
    MQS_CHECK(it != query.end(), StructuralError,
              "momentum_update: query side missing path " + path);
    const auto& q = it->second;
    MQS_CHECK(k.rows() == q.rows() && k.cols() == q.cols(), StructuralError,
              "momentum_update: shape mismatch at " + path);
    k = m * k + (T(1) - m) * q;
  }
}

// Query/key parameter pairing. The key side mirrors the query's encoder
// slice and is only ever written through momentum_update.
template <typename T>
struct MomentumPair {
  const nn::ModelParams<T>* query_params = nullptr;
  nn::ModelParams<T>* key_params = nullptr;
  T m = T(0.999);
};

template <typename T>
void momentum_update(MomentumPair<T>& pair) {
  MQS_CHECK(pair.query_params && pair.key_params, StructuralError,
            "momentum_update: unbound parameter pair");
  momentum_update(*pair.key_params, *pair.query_params, pair.m);
}

}  // namespace mqs::contrast
