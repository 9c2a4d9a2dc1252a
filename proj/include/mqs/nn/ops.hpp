#pragma once

#include <cmath>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/tensor.hpp"

// Differentiable primitives. Each op appends one node; backward closures
// read values back off the tape instead of copying them.
namespace mqs::nn {

template <typename T>
int add(Tape<T>& t, int a, int b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  MQS_CHECK(A.rows() == B.rows() && A.cols() == B.cols(), StructuralError,
            "add: shape mismatch");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int out = static_cast<int>(t.size());
  t.push(A + B, rg, [a, b, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    if (tp.requires_grad(a)) tp.grad_ref(a) += g;
    if (tp.requires_grad(b)) tp.grad_ref(b) += g;
  });
  return out;
}

template <typename T>
int scale(Tape<T>& t, int a, T c) {
  const int out = static_cast<int>(t.size());
  t.push(t.value(a) * c, t.requires_grad(a), [a, c, out](Tape<T>& tp) {
    if (tp.requires_grad(a)) tp.grad_ref(a) += tp.grad_ref(out) * c;
  });
  return out;
}

// Elementwise product with a fixed matrix (dropout masks and the like).
template <typename T>
int mul_const(Tape<T>& t, int a, Mat<T> c) {
  const auto& A = t.value(a);
  MQS_CHECK(A.rows() == c.rows() && A.cols() == c.cols(), StructuralError,
            "mul_const: shape mismatch");
  const int out = static_cast<int>(t.size());
  t.push((A.array() * c.array()).matrix(), t.requires_grad(a),
         [a, c, out](Tape<T>& tp) {
           if (tp.requires_grad(a))
             tp.grad_ref(a).array() += tp.grad_ref(out).array() * c.array();
         });
  return out;
}

// Adds a fixed matrix (positional encodings, attention masks).
template <typename T>
int add_const(Tape<T>& t, int a, const Mat<T>& c) {
  const auto& A = t.value(a);
  MQS_CHECK(A.rows() == c.rows() && A.cols() == c.cols(), StructuralError,
            "add_const: shape mismatch");
  const int out = static_cast<int>(t.size());
  t.push(A + c, t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (tp.requires_grad(a)) tp.grad_ref(a) += tp.grad_ref(out);
  });
  return out;
}

template <typename T>
int sum_all(Tape<T>& t, int a) {
  Mat<T> v(1, 1);
  v(0, 0) = t.value(a).sum();
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (tp.requires_grad(a)) tp.grad_ref(a).array() += tp.grad_ref(out)(0, 0);
  });
  return out;
}

template <typename T>
int matmul(Tape<T>& t, int a, int b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  MQS_CHECK(A.cols() == B.rows(), StructuralError, "matmul: inner dimensions differ");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int out = static_cast<int>(t.size());
  t.push(A * B, rg, [a, b, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    if (tp.requires_grad(a)) tp.grad_ref(a).noalias() += g * tp.value(b).transpose();
    if (tp.requires_grad(b)) tp.grad_ref(b).noalias() += tp.value(a).transpose() * g;
  });
  return out;
}

// A * B^T (attention scores, similarity against representation banks).
template <typename T>
int matmul_nt(Tape<T>& t, int a, int b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  MQS_CHECK(A.cols() == B.cols(), StructuralError, "matmul_nt: inner dimensions differ");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  const int out = static_cast<int>(t.size());
  t.push(A * B.transpose(), rg, [a, b, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    if (tp.requires_grad(a)) tp.grad_ref(a).noalias() += g * tp.value(b);
    if (tp.requires_grad(b)) tp.grad_ref(b).noalias() += g.transpose() * tp.value(a);
  });
  return out;
}

// Broadcast-adds a 1 x d bias row to every row of a.
template <typename T>
int add_row_broadcast(Tape<T>& t, int a, int row) {
  const auto& A = t.value(a);
  const auto& R = t.value(row);
  MQS_CHECK(R.rows() == 1 && R.cols() == A.cols(), StructuralError,
            "add_row_broadcast: bias must be 1 x cols(a)");
  Mat<T> v = A;
  v.rowwise() += R.row(0);
  const bool rg = t.requires_grad(a) || t.requires_grad(row);
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), rg, [a, row, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    if (tp.requires_grad(a)) tp.grad_ref(a) += g;
    if (tp.requires_grad(row)) tp.grad_ref(row).row(0) += g.colwise().sum();
  });
  return out;
}

// Selects rows by index; duplicate indices accumulate gradient (embedding
// lookup is gather_rows on the embedding table).
template <typename T>
int gather_rows(Tape<T>& t, int a, std::vector<int> rows) {
  const auto& A = t.value(a);
  MQS_CHECK(!rows.empty(), StructuralError, "gather_rows: empty index list");
  Mat<T> v(static_cast<Eigen::Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    MQS_CHECK(rows[i] >= 0 && rows[i] < A.rows(), StructuralError,
              "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
  }
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, rows, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto& g = tp.grad_ref(out);
    auto& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
  return out;
}

template <typename T>
int slice_cols(Tape<T>& t, int a, Eigen::Index start, Eigen::Index len) {
  const auto& A = t.value(a);
  MQS_CHECK(start >= 0 && len >= 1 && start + len <= A.cols(), StructuralError,
            "slice_cols: range out of bounds");
  const int out = static_cast<int>(t.size());
  t.push(A.middleCols(start, len), t.requires_grad(a),
         [a, start, len, out](Tape<T>& tp) {
           if (tp.requires_grad(a))
             tp.grad_ref(a).middleCols(start, len) += tp.grad_ref(out);
         });
  return out;
}

template <typename T>
int hstack(Tape<T>& t, const std::vector<int>& parts) {
  MQS_CHECK(!parts.empty(), StructuralError, "hstack: no parts");
  const Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (int p : parts) {
    MQS_CHECK(t.value(p).rows() == rows, StructuralError, "hstack: row counts differ");
    cols += t.value(p).cols();
    rg = rg || t.requires_grad(p);
  }
  Mat<T> v(rows, cols);
  Eigen::Index at = 0;
  for (int p : parts) {
    v.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), rg, [parts, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    Eigen::Index at = 0;
    for (int p : parts) {
      const Eigen::Index w = tp.value(p).cols();
      if (tp.requires_grad(p)) tp.grad_ref(p) += g.middleCols(at, w);
      at += w;
    }
  });
  return out;
}

template <typename T>
int vstack(Tape<T>& t, const std::vector<int>& parts) {
  MQS_CHECK(!parts.empty(), StructuralError, "vstack: no parts");
  const Eigen::Index cols = t.value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (int p : parts) {
    MQS_CHECK(t.value(p).cols() == cols, StructuralError, "vstack: column counts differ");
    rows += t.value(p).rows();
    rg = rg || t.requires_grad(p);
  }
  Mat<T> v(rows, cols);
  Eigen::Index at = 0;
  for (int p : parts) {
    v.middleRows(at, t.value(p).rows()) = t.value(p);
    at += t.value(p).rows();
  }
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), rg, [parts, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    Eigen::Index at = 0;
    for (int p : parts) {
      const Eigen::Index h = tp.value(p).rows();
      if (tp.requires_grad(p)) tp.grad_ref(p) += g.middleRows(at, h);
      at += h;
    }
  });
  return out;
}

// Per-row layer norm with learned gain/bias (both 1 x d).
template <typename T>
int layernorm_rows(Tape<T>& t, int x, int gain, int bias, T eps = T(1e-5)) {
  const auto& X = t.value(x);
  const auto& G = t.value(gain);
  const auto& B = t.value(bias);
  const Eigen::Index d = X.cols();
  MQS_CHECK(G.rows() == 1 && G.cols() == d && B.rows() == 1 && B.cols() == d,
            StructuralError, "layernorm_rows: gain/bias must be 1 x cols(x)");
  Mat<T> v(X.rows(), d);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const T mu = X.row(i).mean();
    const T var = (X.row(i).array() - mu).square().sum() / T(d);
    const T sd = std::sqrt(var + eps);
    v.row(i) = (((X.row(i).array() - mu) / sd) * G.row(0).array()).matrix() + B.row(0);
  }
  const bool rg = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), rg, [x, gain, bias, eps, out](Tape<T>& tp) {
    const auto& g = tp.grad_ref(out);
    const auto& X = tp.value(x);
    const auto& G = tp.value(gain);
    const Eigen::Index d = X.cols();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const T mu = X.row(i).mean();
      const T var = (X.row(i).array() - mu).square().sum() / T(d);
      const T sd = std::sqrt(var + eps);
      Eigen::Array<T, 1, Eigen::Dynamic> xhat = (X.row(i).array() - mu) / sd;
      Eigen::Array<T, 1, Eigen::Dynamic> gy = g.row(i).array();
      if (tp.requires_grad(gain)) tp.grad_ref(gain).row(0).array() += gy * xhat;
      if (tp.requires_grad(bias)) tp.grad_ref(bias).row(0).array() += gy;
      if (tp.requires_grad(x)) {
        Eigen::Array<T, 1, Eigen::Dynamic> dxhat = gy * G.row(0).array();
        const T m1 = dxhat.mean();
        const T m2 = (dxhat * xhat).mean();
        tp.grad_ref(x).row(i).array() += (dxhat - m1 - xhat * m2) / sd;
      }
    }
  });
  return out;
}

template <typename T>
int softmax_rows(Tape<T>& t, int a) {
  const auto& A = t.value(a);
  Mat<T> v(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const T m = A.row(i).maxCoeff();
    Eigen::Array<T, 1, Eigen::Dynamic> e = (A.row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto& g = tp.grad_ref(out);
    const auto& P = tp.value(out);
    auto& ga = tp.grad_ref(a);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const T dot = (g.row(i).array() * P.row(i).array()).sum();
      ga.row(i).array() += P.row(i).array() * (g.row(i).array() - dot);
    }
  });
  return out;
}

// GELU, tanh approximation (smooth everywhere, finite-difference friendly).
template <typename T>
int gelu(Tape<T>& t, int a) {
  static const T kC = std::sqrt(T(2) / T(3.14159265358979323846));
  static const T kA = T(0.044715);
  const auto& A = t.value(a);
  Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x = A.array();
  auto u = (kC * (x + kA * x.cube())).eval();
  Mat<T> v = (T(0.5) * x * (T(1) + u.tanh())).matrix();
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto x = tp.value(a).array();
    auto u = (kC * (x + kA * x.cube())).eval();
    auto th = u.tanh().eval();
    auto du = (kC * (T(1) + T(3) * kA * x.square())).eval();
    tp.grad_ref(a).array() +=
        tp.grad_ref(out).array() *
        (T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th.square()) * du);
  });
  return out;
}

// n x d -> 1 x d column means (sentence pooling).
template <typename T>
int mean_rows(Tape<T>& t, int a) {
  const auto& A = t.value(a);
  MQS_CHECK(A.rows() >= 1, StructuralError, "mean_rows: empty matrix");
  Mat<T> v = A.colwise().mean();
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto& g = tp.grad_ref(out);
    const T inv = T(1) / T(tp.value(a).rows());
    tp.grad_ref(a).rowwise() += (g * inv).row(0);
  });
  return out;
}

// 1 x d -> unit-norm 1 x d. Rejects near-zero vectors, whose cosine is
// undefined.
template <typename T>
int l2_normalize_row(Tape<T>& t, int a) {
  const auto& A = t.value(a);
  MQS_CHECK(A.rows() == 1, StructuralError, "l2_normalize_row: expected a 1 x d row");
  const T norm = A.norm();
  MQS_CHECK(norm > T(1e-12), NumericError,
            "l2_normalize_row: degenerate (near-zero) vector");
  const int out = static_cast<int>(t.size());
  t.push(A / norm, t.requires_grad(a), [a, norm, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto& g = tp.grad_ref(out);
    const auto& y = tp.value(out);
    const T proj = (g.array() * y.array()).sum();
    tp.grad_ref(a) += (g - proj * y) / norm;
  });
  return out;
}

// 1 x n -> 1 x 1 log-sum-exp with max shift.
template <typename T>
int logsumexp_all(Tape<T>& t, int a) {
  const auto& A = t.value(a);
  MQS_CHECK(A.rows() == 1, StructuralError, "logsumexp_all: expected a 1 x n row");
  const T m = A.maxCoeff();
  Mat<T> v(1, 1);
  v(0, 0) = m + std::log((A.array() - m).exp().sum());
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(a), [a, out](Tape<T>& tp) {
    if (!tp.requires_grad(a)) return;
    const auto& A = tp.value(a);
    const T m = A.maxCoeff();
    auto e = (A.array() - m).exp().eval();
    tp.grad_ref(a).array() += tp.grad_ref(out)(0, 0) * (e / e.sum());
  });
  return out;
}

// Mean token-level negative log-likelihood: logits row i scored against
// targets[i]. The 1/n factor matches a mean over real target positions, so
// callers must pass only live rows.
template <typename T>
int cross_entropy_mean(Tape<T>& t, int logits, std::vector<int> targets) {
  const auto& L = t.value(logits);
  MQS_CHECK(static_cast<std::size_t>(L.rows()) == targets.size(), StructuralError,
            "cross_entropy_mean: logits rows != target count");
  MQS_CHECK(!targets.empty(), StructuralError, "cross_entropy_mean: no targets");
  T total = T(0);
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const int tgt = targets[static_cast<std::size_t>(i)];
    MQS_CHECK(tgt >= 0 && tgt < L.cols(), StructuralError,
              "cross_entropy_mean: target id out of vocabulary");
    const T m = L.row(i).maxCoeff();
    const T lse = m + std::log((L.row(i).array() - m).exp().sum());
    total += lse - L(i, tgt);
  }
  Mat<T> v(1, 1);
  v(0, 0) = total / T(L.rows());
  const int out = static_cast<int>(t.size());
  t.push(std::move(v), t.requires_grad(logits), [logits, targets, out](Tape<T>& tp) {
    if (!tp.requires_grad(logits)) return;
    const auto& L = tp.value(logits);
    const T gscale = tp.grad_ref(out)(0, 0) / T(L.rows());
    auto& gl = tp.grad_ref(logits);
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const T m = L.row(i).maxCoeff();
      auto e = (L.row(i).array() - m).exp().eval();
      gl.row(i).array() += gscale * (e / e.sum());
      gl(i, targets[static_cast<std::size_t>(i)]) -= gscale;
    }
  });
  return out;
}

}  // namespace mqs::nn
