#pragma once

#include "gradient/dp.hpp"
#include "gradient/exact_lp.hpp"
#include "gradient/sinkhorn.hpp"

namespace gradient {

/// Pairwise contextual distances over the full state set (contexts are a
/// distinguished subset of the indices under the homogeneity assumption).
struct DistanceTable {
  Matrix values;
  bool normalized = false;
  double diagonal_offset = 0.0;
  bool converged = true;
  int iterations = 0;

  int size() const { return static_cast<int>(values.rows()); }

  void validate() const {
    if (values.rows() != values.cols()) throw std::runtime_error("DistanceTable: non-square");
    if (!values.allFinite() || values.minCoeff() < 0.0)
      throw std::runtime_error("DistanceTable: entries must be finite and nonnegative");
    if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw std::runtime_error("DistanceTable: asymmetric");
    if (normalized && std::abs(values.maxCoeff() - 1.0) > 1e-9)
      throw std::runtime_error("DistanceTable: normalized table must have max 1");
    if (diagonal_offset == 0.0 && values.diagonal().cwiseAbs().maxCoeff() > 1e-12)
      throw std::runtime_error("DistanceTable: nonzero diagonal without recorded offset");
  }
};

/// Geometric-series iteration budget for a gamma-contraction to reach eps_tol.
inline int contraction_iteration_budget(double gamma, double eps_tol) {
  return static_cast<int>(std::ceil(std::log(eps_tol * (1.0 - gamma)) / std::log(gamma)));
}

namespace detail {

struct InducedKernel {
  Vector reward;                          // expected one-step reward under pi
  std::vector<std::vector<int>> support;  // next-state supports under pi
  std::vector<Vector> mass;               // matching probabilities
};

inline InducedKernel induced_kernel(const TabularCMDP& cmdp, const Policy& policy) {
  policy.validate();
  if (policy.n_states() != cmdp.n_states || policy.n_actions() != cmdp.n_actions)
    throw std::invalid_argument("bisim: policy shape mismatch");
  InducedKernel k;
  k.reward = Vector::Zero(cmdp.n_states);
  k.support.resize(cmdp.n_states);
  k.mass.resize(cmdp.n_states);
  for (int s = 0; s < cmdp.n_states; ++s) {
    Vector row = Vector::Zero(cmdp.n_states);
    for (int a = 0; a < cmdp.n_actions; ++a) {
      double p = policy.probs(s, a);
      if (p == 0.0) continue;
      k.reward[s] += p * cmdp.reward(s, a);
      row += p * cmdp.transition[a].row(s).transpose();
    }
    for (int t = 0; t < cmdp.n_states; ++t)
      if (row[t] > 0.0) k.support[s].push_back(t);
    Vector m(k.support[s].size());
    for (size_t i = 0; i < k.support[s].size(); ++i) m[i] = row[k.support[s][i]];
    k.mass[s] = m;
  }
  return k;
}

/// Transport cost between two induced next-state distributions under ground
/// cost d. Exact LP on small supports, entropic otherwise.
inline double next_state_transport(const InducedKernel& k, int i, int j, const Matrix& d) {
  const auto &Si = k.support[i], &Sj = k.support[j];
  if (Si.size() == 1 && Sj.size() == 1) return d(Si[0], Sj[0]);
  Matrix sub(Si.size(), Sj.size());
  for (size_t a = 0; a < Si.size(); ++a)
    for (size_t b = 0; b < Sj.size(); ++b) sub(a, b) = d(Si[a], Sj[b]);
  CostMatrix C(std::move(sub));
  Categorical mu(k.mass[i]), nu(k.mass[j]);
  if (Si.size() <= 64 && Sj.size() <= 64) return exact_ot_lp(mu, nu, C).cost;
  SinkhornConfig cfg;
  cfg.epsilon = std::max(1e-3 * d.maxCoeff(), 1e-12);
  return sinkhorn_plan_annealed(mu, nu, C, cfg).cost;
}

}  // namespace detail

/// One application of the contextual bisimulation operator:
/// new(i,j) = |reward gap under pi| + gamma * W_d(next-state dists).
inline DistanceTable bisim_operator(const DistanceTable& d, const TabularCMDP& cmdp,
                                    const Policy& policy, double gamma) {
  if (d.size() != cmdp.n_states)
    throw std::invalid_argument("bisim_operator: table must cover the full state set");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("bisim_operator: gamma in [0,1) required");
  detail::InducedKernel k = detail::induced_kernel(cmdp, policy);
  DistanceTable out;
  out.values = Matrix::Zero(cmdp.n_states, cmdp.n_states);
  for (int i = 0; i < cmdp.n_states; ++i)
    for (int j = i + 1; j < cmdp.n_states; ++j) {
      double v = std::abs(k.reward[i] - k.reward[j]);
      if (gamma > 0.0) v += gamma * detail::next_state_transport(k, i, j, d.values);
      out.values(i, j) = out.values(j, i) = v;
    }
  return out;
}

/// Fixed point of bisim_operator from the zero table (pre-normalization).
inline DistanceTable pi_contextual_distance(const TabularCMDP& cmdp, const Policy& policy,
                                            double gamma, double eps_tol = 1e-8) {
  if (eps_tol <= 0.0) throw std::invalid_argument("pi_contextual_distance: eps_tol > 0 required");
  detail::InducedKernel k = detail::induced_kernel(cmdp, policy);
  const int n = cmdp.n_states;
  const int budget = contraction_iteration_budget(gamma, eps_tol);
  DistanceTable d;
  d.values = Matrix::Zero(n, n);
  d.converged = false;
  for (int it = 0; it < budget; ++it) {
    Matrix next = Matrix::Zero(n, n);
    double diff = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double v = std::abs(k.reward[i] - k.reward[j]);
        if (gamma > 0.0) v += gamma * detail::next_state_transport(k, i, j, d.values);
        next(i, j) = next(j, i) = v;
        diff = std::max(diff, std::abs(v - d.values(i, j)));
      }
    d.values.swap(next);
    d.iterations = it + 1;
    if (diff <= eps_tol) {
      d.converged = true;
      break;
    }
  }
  d.validate();
  return d;
}

/// Dynamic-programming metric for deterministic dynamics and policy:
/// M'(s1,s2) = |r1 - r2| + gamma * M(s1', s2'), then a small diagonal offset is
/// added and the table is scaled to max 1 (degenerate all-zero tables get an
/// offset-only diagonal and stay unnormalized at scale 0 -> identity scaling).
inline DistanceTable exact_metric_deterministic(const TabularCMDP& cmdp, const Policy& policy,
                                                double gamma, double eps_tol = 1e-8,
                                                double offset_scale = 1e-6) {
  if (!cmdp.deterministic())
    throw std::invalid_argument(
        "exact_metric_deterministic: stochastic dynamics; use pi_contextual_distance");
  policy.validate();
  std::vector<int> act(cmdp.n_states), succ(cmdp.n_states);
  for (int s = 0; s < cmdp.n_states; ++s) {
    act[s] = policy.action_at(s);
    if (std::abs(policy.probs(s, act[s]) - 1.0) > 1e-9)
      throw std::invalid_argument("exact_metric_deterministic: policy must be deterministic");
    succ[s] = cmdp.successor(s, act[s]);
  }
  const int n = cmdp.n_states;
  const int budget = contraction_iteration_budget(gamma, eps_tol);
  DistanceTable d;
  d.values = Matrix::Zero(n, n);
  d.converged = false;
  for (int it = 0; it < budget; ++it) {
    Matrix next(n, n);
    double diff = 0.0;
    for (int i = 0; i < n; ++i) {
      next(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        double v = std::abs(cmdp.reward(i, act[i]) - cmdp.reward(j, act[j])) +
                   gamma * d.values(succ[i], succ[j]);
        next(i, j) = next(j, i) = v;
        diff = std::max(diff, std::abs(v - d.values(i, j)));
      }
    }
    d.values.swap(next);
    d.iterations = it + 1;
    if (diff <= eps_tol) {
      d.converged = true;
      break;
    }
  }
  double max_pre = d.values.maxCoeff();
  double offset = offset_scale * max_pre;
  d.values.diagonal().array() += offset;
  if (max_pre + offset > 0.0) {
    d.values /= d.values.maxCoeff();
    d.normalized = true;
  }
  d.diagonal_offset = offset;
  return d;
}

/// Euclidean distance on dim-dimensional contexts.
inline ContextMetric l2_surrogate(int dim) {
  if (dim < 1) throw std::invalid_argument("l2_surrogate: positive dimension required");
  return [dim](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != dim || b.size() != dim)
      throw std::invalid_argument("l2_surrogate: dimension mismatch");
    return (a - b).norm();
  };
}

/// Pseudometric |J(c1) - J(c2)| from an episodic-return estimator.
inline ContextMetric reward_gap_surrogate(std::function<double(const Vector&)> J) {
  return [J = std::move(J)](const Eigen::Ref<const Vector>& a,
                            const Eigen::Ref<const Vector>& b) {
    double ja = J(a), jb = J(b);
    if (!std::isfinite(ja) || !std::isfinite(jb))
      throw std::runtime_error("reward_gap_surrogate: non-finite return estimate");
    return std::abs(ja - jb);
  };
}

/// Median of pairwise Euclidean distances; the standard kernel-bandwidth pick.
inline double median_pairwise_distance(const Matrix& points) {
  std::vector<double> d;
  for (int i = 0; i < points.rows(); ++i)
    for (int j = i + 1; j < points.rows(); ++j)
      d.push_back((points.row(i) - points.row(j)).norm());
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  double m = d[d.size() / 2];
  return m > 0.0 ? m : 1.0;
}

/// RBF kernel ridge regression through the samples; the deterministic
/// posterior-mean stand-in for a Gaussian-process return model.
inline std::function<double(const Vector&)> fit_reward_model(const Matrix& contexts,
                                                             const Vector& returns,
                                                             double kernel_bandwidth = 0.0,
                                                             double ridge = 1e-6) {
  const int n = static_cast<int>(contexts.rows());
  if (n < 1 || returns.size() != n)
    throw std::invalid_argument("fit_reward_model: need >= 1 sample with matching targets");
  if (ridge <= 0.0) throw std::invalid_argument("fit_reward_model: positive ridge required");
  double h = kernel_bandwidth > 0.0 ? kernel_bandwidth : median_pairwise_distance(contexts);
  Matrix K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K(i, j) = std::exp(-0.5 * (contexts.row(i) - contexts.row(j)).squaredNorm() / (h * h));
  K.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(K);
  Vector alpha = ldlt.solve(returns);
  double residual = (K * alpha - returns).norm();
  if (ldlt.info() != Eigen::Success || !alpha.allFinite() ||
      residual > 1e-6 * std::max(1.0, returns.norm()))
    throw std::runtime_error("fit_reward_model: kernel system ill-conditioned (residual " +
                             std::to_string(residual) + ")");
  Matrix X = contexts;
  return [X, alpha, h](const Vector& c) {
    if (c.size() != X.cols()) throw std::invalid_argument("reward model: dimension mismatch");
    double out = 0.0;
    for (int i = 0; i < X.rows(); ++i)
      out += alpha[i] * std::exp(-0.5 * (X.row(i).transpose() - c).squaredNorm() / (h * h));
    return out;
  };
}

}  // namespace gradient
