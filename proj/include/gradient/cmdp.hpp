#pragma once

#include <random>
#include <stdexcept>
#include <vector>

#include "gradient/distributions.hpp"

namespace gradient {

using Rng = std::mt19937_64;

/// Finite contextual MDP. Under the homogeneity flag the dynamics and rewards
/// are context-independent and the initial state of context c is the state
/// identified with c; that is the regime of the maze environments and of the
/// transfer analysis.
struct TabularCMDP {
  int n_states = 0;
  int n_actions = 0;
  int n_contexts = 0;
  double gamma = 0.99;
  bool assumption1 = false;

  // Homogeneous dynamics: transition[a] is n_states x n_states (row-stochastic),
  // reward(s, a) the immediate reward. Context enters through initial_state only.
  std::vector<Matrix> transition;
  Matrix reward;
  double reward_min = 0.0, reward_max = 0.0;
  std::vector<char> terminal;        // absorbing states ending an episode
  std::vector<int> context_state;    // initial state for each context

  const Eigen::Ref<const Vector> transition_row(int s, int a, int /*c*/) const {
    return transition[a].row(s).transpose();
  }
  double reward_at(int s, int a, int /*c*/) const { return reward(s, a); }
  int initial_state(int c) const { return context_state[c]; }

  void validate() const {
    if (n_states < 1 || n_actions < 1 || n_contexts < 1)
      throw std::invalid_argument("TabularCMDP: empty state/action/context space");
    if (static_cast<int>(transition.size()) != n_actions)
      throw std::invalid_argument("TabularCMDP: one transition matrix per action required");
    for (const Matrix& t : transition) {
      if (t.rows() != n_states || t.cols() != n_states)
        throw std::invalid_argument("TabularCMDP: transition matrix shape mismatch");
      if (((t.rowwise().sum().array() - 1.0).abs() > 1e-9).any())
        throw std::invalid_argument("TabularCMDP: transition row does not sum to 1");
      if ((t.array() < 0.0).any())
        throw std::invalid_argument("TabularCMDP: negative transition probability");
    }
    if (reward.rows() != n_states || reward.cols() != n_actions)
      throw std::invalid_argument("TabularCMDP: reward shape mismatch");
    if (reward.minCoeff() < reward_min - 1e-12 || reward.maxCoeff() > reward_max + 1e-12)
      throw std::invalid_argument("TabularCMDP: declared reward bounds violated");
    if (static_cast<int>(context_state.size()) != n_contexts)
      throw std::invalid_argument("TabularCMDP: context_state size mismatch");
    for (int s : context_state)
      if (s < 0 || s >= n_states)
        throw std::invalid_argument("TabularCMDP: context_state index out of range");
  }

  bool deterministic() const {
    for (const Matrix& t : transition)
      if ((t.array() != 0.0 && t.array() != 1.0).any()) return false;
    return true;
  }

  /// Deterministic successor; only valid when the (s, a) row is a point mass.
  int successor(int s, int a) const {
    int best = 0;
    transition[a].row(s).maxCoeff(&best);
    return best;
  }
};

/// Samples one environment transition.
inline std::pair<int, double> step(const TabularCMDP& cmdp, int state, int action, int context,
                                   Rng& rng) {
  if (state < 0 || state >= cmdp.n_states || action < 0 || action >= cmdp.n_actions ||
      context < 0 || context >= cmdp.n_contexts)
    throw std::out_of_range("step: index out of range");
  const auto row = cmdp.transition_row(state, action, context);
  double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int next = cmdp.n_states - 1;
  for (int s = 0; s < cmdp.n_states; ++s) {
    acc += row[s];
    if (r <= acc) {
      next = s;
      break;
    }
  }
  return {next, cmdp.reward_at(state, action, context)};
}

/// Discrete context index set.
inline std::vector<int> enumerate_contexts(const TabularCMDP& cmdp) {
  std::vector<int> out(cmdp.n_contexts);
  for (int c = 0; c < cmdp.n_contexts; ++c) out[c] = c;
  return out;
}

}  // namespace gradient
