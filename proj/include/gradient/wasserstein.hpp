#pragma once

#include <stdexcept>

#include "gradient/barycenter.hpp"

namespace gradient {

struct OtSolveConfig {
  bool exact = true;        // LP oracle when within cap, else annealed Sinkhorn
  bool debiased = false;    // subtract the entropic self-transport bias
  SinkhornConfig sinkhorn{};
};

/// Transport cost between two categorical distributions under a precomputed
/// ground-cost matrix (exact or entropic per cfg).
inline double wasserstein_distance(const Categorical& mu, const Categorical& nu,
                                   const CostMatrix& C, const OtSolveConfig& cfg = {}) {
  if (mu.size() != C.rows() || nu.size() != C.cols())
    throw std::invalid_argument("wasserstein_distance: dimension mismatch");
  if (cfg.exact && static_cast<long>(mu.size()) * nu.size() <= kLpOracleCap)
    return exact_ot_lp(mu, nu, C).cost;

  double w = sinkhorn_plan_annealed(mu, nu, C, cfg.sinkhorn).cost;
  if (cfg.debiased) {
    if (C.rows() != C.cols())
      throw std::invalid_argument("wasserstein_distance: debiasing needs a shared support");
    w -= 0.5 * sinkhorn_plan_annealed(mu, mu, C, cfg.sinkhorn).cost;
    w -= 0.5 * sinkhorn_plan_annealed(nu, nu, C, cfg.sinkhorn).cost;
  }
  return w;
}

/// Transport cost between two particle clouds under a ground metric.
inline double wasserstein_distance(const Particles& mu, const Particles& nu,
                                   const ContextMetric& metric, const OtSolveConfig& cfg = {}) {
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("wasserstein_distance: particle dimension mismatch");
  CostMatrix C = build_cost_matrix(mu, nu, metric);
  Categorical a(mu.weights), b(nu.weights);
  if (cfg.exact && static_cast<long>(mu.size()) * nu.size() <= kLpOracleCap)
    return exact_ot_lp(a, b, C).cost;

  double w = sinkhorn_plan_annealed(a, b, C, cfg.sinkhorn).cost;
  if (cfg.debiased) {
    CostMatrix Caa = build_cost_matrix(mu, mu, metric);
    CostMatrix Cbb = build_cost_matrix(nu, nu, metric);
    w -= 0.5 * sinkhorn_plan_annealed(a, a, Caa, cfg.sinkhorn).cost;
    w -= 0.5 * sinkhorn_plan_annealed(b, b, Cbb, cfg.sinkhorn).cost;
  }
  return w;
}

}  // namespace gradient
