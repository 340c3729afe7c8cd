#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "gradient/distributions.hpp"

namespace gradient {

/// Ground-metric distance between two context vectors.
using ContextMetric =
    std::function<double(const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>&)>;

/// Ground-metric cost matrix C[i][j] = d(src[i], tgt[j]).
struct CostMatrix {
  Matrix entries;

  CostMatrix() = default;
  explicit CostMatrix(Matrix m) : entries(std::move(m)) { validate(); }

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
  double max_entry() const { return entries.maxCoeff(); }

  void validate() const {
    if (entries.size() == 0)
      throw std::invalid_argument("CostMatrix: empty");
    if (!entries.allFinite() || (entries.array() < 0.0).any())
      throw std::invalid_argument("CostMatrix: entries must be finite and nonnegative");
  }
};

inline CostMatrix build_cost_matrix(const Matrix& src_support, const Matrix& tgt_support,
                                    const ContextMetric& metric) {
  if (src_support.rows() == 0 || tgt_support.rows() == 0)
    throw std::invalid_argument("build_cost_matrix: empty support");
  Matrix c(src_support.rows(), tgt_support.rows());
  for (int i = 0; i < src_support.rows(); ++i) {
    for (int j = 0; j < tgt_support.rows(); ++j) {
      double d = metric(src_support.row(i), tgt_support.row(j));
      if (!std::isfinite(d) || d < 0.0)
        throw std::invalid_argument("build_cost_matrix: non-finite or negative metric at pair (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      c(i, j) = d;
    }
  }
  return CostMatrix(std::move(c));
}

/// Cost matrix between two particle clouds under the given metric.
inline CostMatrix build_cost_matrix(const Particles& src, const Particles& tgt,
                                    const ContextMetric& metric) {
  return build_cost_matrix(src.points, tgt.points, metric);
}

}  // namespace gradient
