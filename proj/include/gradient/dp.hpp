#pragma once

#include <cmath>

#include "gradient/cmdp.hpp"

namespace gradient {

/// Stationary Markov policy as a row-stochastic state-action matrix.
struct Policy {
  Matrix probs;  // n_states x n_actions

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }

  static Policy deterministic(const std::vector<int>& actions, int n_actions) {
    Policy p;
    p.probs = Matrix::Zero(static_cast<int>(actions.size()), n_actions);
    for (int s = 0; s < static_cast<int>(actions.size()); ++s) {
      if (actions[s] < 0 || actions[s] >= n_actions)
        throw std::invalid_argument("Policy: action index out of range");
      p.probs(s, actions[s]) = 1.0;
    }
    return p;
  }

  static Policy uniform(int n_states, int n_actions) {
    Policy p;
    p.probs = Matrix::Constant(n_states, n_actions, 1.0 / n_actions);
    return p;
  }

  void validate() const {
    if (probs.rows() < 1 || probs.cols() < 1)
      throw std::invalid_argument("Policy: empty table");
    if ((probs.array() < 0.0).any() ||
        ((probs.rowwise().sum().array() - 1.0).abs() > 1e-9).any())
      throw std::invalid_argument("Policy: rows must be distributions");
  }

  /// Most probable action; ties broken by lowest index.
  int action_at(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions(); ++a)
      if (probs(s, a) > probs(s, best)) best = a;
    return best;
  }

  int sample(int s, Rng& rng) const {
    double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (int a = 0; a < n_actions(); ++a) {
      acc += probs(s, a);
      if (r <= acc) return a;
    }
    return n_actions() - 1;
  }
};

/// Exact solve of the Bellman expectation equation (I - gamma P_pi) V = r_pi.
inline Vector policy_evaluation_values(const TabularCMDP& cmdp, const Policy& policy) {
  if (policy.n_states() != cmdp.n_states || policy.n_actions() != cmdp.n_actions)
    throw std::invalid_argument("policy_evaluation: policy shape mismatch");
  const int n = cmdp.n_states;
  Matrix P = Matrix::Zero(n, n);
  Vector r = Vector::Zero(n);
  for (int a = 0; a < cmdp.n_actions; ++a) {
    P += policy.probs.col(a).asDiagonal() * cmdp.transition[a];
    r += policy.probs.col(a).cwiseProduct(cmdp.reward.col(a));
  }
  Matrix A = Matrix::Identity(n, n) - cmdp.gamma * P;
  Vector V = A.partialPivLu().solve(r);
  if (!V.allFinite()) throw std::runtime_error("policy_evaluation: singular Bellman system");
  return V;
}

/// V^pi at the initial state of one context.
inline double policy_evaluation(const TabularCMDP& cmdp, const Policy& policy, int context) {
  if (context < 0 || context >= cmdp.n_contexts)
    throw std::out_of_range("policy_evaluation: context out of range");
  return policy_evaluation_values(cmdp, policy)[cmdp.initial_state(context)];
}

struct ValueIterationResult {
  Vector values;
  Policy policy;
  bool converged = false;
  int iterations = 0;
};

/// Sup-norm-converged optimal values and the greedy deterministic policy.
inline ValueIterationResult value_iteration(const TabularCMDP& cmdp, double eps_tol = 1e-10) {
  const int n = cmdp.n_states;
  Vector V = Vector::Zero(n);
  // Geometric convergence allows a generous a-priori iteration budget.
  const int max_iter =
      std::max(64, 4 * static_cast<int>(std::ceil(std::log(eps_tol * (1.0 - cmdp.gamma)) /
                                                  std::log(cmdp.gamma))));
  ValueIterationResult out;
  for (int it = 0; it < max_iter; ++it) {
    Vector Vn(n);
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < cmdp.n_actions; ++a)
        best = std::max(best, cmdp.reward(s, a) + cmdp.gamma * cmdp.transition[a].row(s).dot(V));
      Vn[s] = best;
    }
    double diff = (Vn - V).cwiseAbs().maxCoeff();
    V = Vn;
    out.iterations = it + 1;
    if (diff <= eps_tol) {
      out.converged = true;
      break;
    }
  }
  std::vector<int> greedy(n, 0);
  for (int s = 0; s < n; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < cmdp.n_actions; ++a) {
      double q = cmdp.reward(s, a) + cmdp.gamma * cmdp.transition[a].row(s).dot(V);
      if (q > best + 1e-12) {
        best = q;
        greedy[s] = a;
      }
    }
  }
  out.values = std::move(V);
  out.policy = Policy::deterministic(greedy, cmdp.n_actions);
  return out;
}

}  // namespace gradient
