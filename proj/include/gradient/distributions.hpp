#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

namespace gradient {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kWeightTol = 1e-9;

/// Categorical distribution over an indexed discrete support.
struct Categorical {
  Vector weights;

  Categorical() = default;

  explicit Categorical(Vector w) : weights(std::move(w)) { validate(); }

  static Categorical dirac(int n, int index) {
    Vector w = Vector::Zero(n);
    w[index] = 1.0;
    return Categorical(std::move(w));
  }

  static Categorical uniform(int n) {
    return Categorical(Vector::Constant(n, 1.0 / n));
  }

  int size() const { return static_cast<int>(weights.size()); }

  void validate() const {
    if (weights.size() == 0)
      throw std::invalid_argument("Categorical: empty weight vector");
    if ((weights.array() < 0.0).any())
      throw std::invalid_argument("Categorical: negative weight");
    if (std::abs(weights.sum() - 1.0) > kWeightTol)
      throw std::invalid_argument("Categorical: weights do not sum to 1");
  }
};

/// Weighted particle cloud over a continuous context space.
struct Particles {
  Matrix points;   // n x dim, one context per row
  Vector weights;  // sums to 1

  Particles() = default;

  Particles(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) {
    validate();
  }

  explicit Particles(Matrix pts)
      : points(std::move(pts)),
        weights(Vector::Constant(points.rows(), 1.0 / points.rows())) {
    validate();
  }

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  void validate() const {
    if (points.rows() < 1)
      throw std::invalid_argument("Particles: empty cloud");
    if (weights.size() != points.rows())
      throw std::invalid_argument("Particles: weight/point count mismatch");
    if ((weights.array() < 0.0).any())
      throw std::invalid_argument("Particles: negative weight");
    if (std::abs(weights.sum() - 1.0) > kWeightTol)
      throw std::invalid_argument("Particles: weights do not sum to 1");
  }
};

/// A task distribution is either fixed-support (categorical over a discrete
/// context set) or free-support (particle cloud).
using TaskDistribution = std::variant<Categorical, Particles>;

inline double total_variation(const Categorical& a, const Categorical& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("total_variation: size mismatch");
  return 0.5 * (a.weights - b.weights).cwiseAbs().sum();
}

}  // namespace gradient
