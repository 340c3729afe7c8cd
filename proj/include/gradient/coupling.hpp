#pragma once

#include <stdexcept>

#include "gradient/distributions.hpp"

namespace gradient {

inline constexpr double kMarginalTol = 1e-6;

/// Transport plan between two categorical marginals plus its cost <plan, C>.
struct Coupling {
  Matrix plan;
  double cost = 0.0;
  bool converged = true;
  int iterations = 0;
  double marginal_error = 0.0;

  /// Largest violation of the prescribed row/column marginals.
  double max_marginal_violation(const Categorical& mu, const Categorical& nu) const {
    double row = (plan.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff();
    double col = (plan.colwise().sum().transpose() - nu.weights).cwiseAbs().maxCoeff();
    return std::max(row, col);
  }

  void check_feasible(const Categorical& mu, const Categorical& nu,
                      double tol = kMarginalTol) const {
    if ((plan.array() < 0.0).any())
      throw std::runtime_error("Coupling: negative plan entry");
    if (max_marginal_violation(mu, nu) > tol)
      throw std::runtime_error("Coupling: marginal constraints violated");
  }
};

}  // namespace gradient
