#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace mqs::nn {

// All dense math runs on row-major matrices; row-major keeps serialization a
// straight memcpy of parameter paths.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
inline bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

}  // namespace mqs::nn
