#pragma once

#include "gradient/dp.hpp"
#include "gradient/distributions.hpp"

namespace gradient {

/// Tabular action-value estimates plus bookkeeping for the exploration schedule.
struct QTable {
  Matrix values;                       // n_states x n_actions
  Eigen::MatrixXi visit_counts;       // same shape
  long episodes = 0;                   // episodes trained since the last schedule reset

  static QTable zeros(int n_states, int n_actions) {
    QTable q;
    q.values = Matrix::Zero(n_states, n_actions);
    q.visit_counts = Eigen::MatrixXi::Zero(n_states, n_actions);
    return q;
  }

  void validate() const {
    if (!values.allFinite()) throw std::runtime_error("QTable: non-finite entries");
    if (visit_counts.rows() != values.rows() || visit_counts.cols() != values.cols())
      throw std::runtime_error("QTable: count shape mismatch");
    if ((visit_counts.array() < 0).any()) throw std::runtime_error("QTable: negative counts");
  }

  int greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < values.cols(); ++a)
      if (values(s, a) > values(s, best)) best = a;
    return best;
  }
};

struct LearnerConfig {
  double learning_rate = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long epsilon_decay_episodes = 2000;  // linear schedule horizon, in episodes
  int episodes_per_round = 50;
  int max_episode_steps = 200;
  unsigned long seed = 0;

  void validate() const {
    if (learning_rate <= 0.0 || learning_rate > 1.0)
      throw std::invalid_argument("LearnerConfig: learning_rate in (0,1] required");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
      throw std::invalid_argument("LearnerConfig: epsilon in [0,1] required");
    if (epsilon_decay_episodes < 1)
      throw std::invalid_argument("LearnerConfig: positive decay horizon required");
    if (episodes_per_round < 0)
      throw std::invalid_argument("LearnerConfig: nonnegative episodes_per_round required");
    if (max_episode_steps < 1)
      throw std::invalid_argument("LearnerConfig: positive max_episode_steps required");
  }

  double epsilon_at(long episode) const {
    double t = std::min(1.0, double(episode) / double(epsilon_decay_episodes));
    return epsilon_start + t * (epsilon_end - epsilon_start);
  }
};

struct RoundResult {
  double mean_return = 0.0;  // mean undiscounted episodic return G
  bool has_return = false;   // false when zero episodes were requested
  long env_steps = 0;
};

namespace detail {

inline int sample_context(const Categorical& dist, Rng& rng) {
  double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int c = 0; c < dist.size(); ++c) {
    acc += dist.weights[c];
    if (r <= acc) return c;
  }
  return dist.size() - 1;
}

}  // namespace detail

/// One training round of one-step temporal-difference control: episodes_per_round
/// episodes with contexts drawn from stage_dist and epsilon-greedy behavior on
/// the supplied table. Mutates q in place and reports the mean training return.
inline RoundResult q_learning_round(const TabularCMDP& cmdp, const Categorical& stage_dist,
                                    QTable& q, const LearnerConfig& cfg, Rng& rng) {
  cfg.validate();
  stage_dist.validate();
  q.validate();
  if (stage_dist.size() != cmdp.n_contexts)
    throw std::invalid_argument("q_learning_round: stage distribution size mismatch");
  if (q.values.rows() != cmdp.n_states || q.values.cols() != cmdp.n_actions)
    throw std::invalid_argument("q_learning_round: table shape mismatch");

  RoundResult out;
  if (cfg.episodes_per_round == 0) return out;

  double total = 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> rand_action(0, cmdp.n_actions - 1);
  for (int ep = 0; ep < cfg.episodes_per_round; ++ep) {
    const double eps = cfg.epsilon_at(q.episodes);
    int context = detail::sample_context(stage_dist, rng);
    int s = cmdp.initial_state(context);
    double G = 0.0;
    for (int t = 0; t < cfg.max_episode_steps && !cmdp.terminal[s]; ++t) {
      int a = (unif(rng) < eps) ? rand_action(rng) : q.greedy_action(s);
      auto [ns, r] = step(cmdp, s, a, context, rng);
      double target = r;
      if (!cmdp.terminal[ns]) target += cmdp.gamma * q.values.row(ns).maxCoeff();
      q.values(s, a) += cfg.learning_rate * (target - q.values(s, a));
      q.visit_counts(s, a) += 1;
      G += r;
      s = ns;
      ++out.env_steps;
    }
    total += G;
    ++q.episodes;
  }
  out.mean_return = total / cfg.episodes_per_round;
  out.has_return = true;
  return out;
}

/// One-hot argmax policy; ties broken by lowest action index.
inline Policy greedy_policy(const QTable& q) {
  std::vector<int> actions(q.values.rows());
  for (int s = 0; s < q.values.rows(); ++s) actions[s] = q.greedy_action(s);
  return Policy::deterministic(actions, static_cast<int>(q.values.cols()));
}

/// Monte-Carlo mean of undiscounted episodic returns with c ~ dist.
inline double evaluate_return(const TabularCMDP& cmdp, const Policy& policy,
                              const Categorical& dist, int n_episodes, int max_episode_steps,
                              Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate_return: n_episodes >= 1 required");
  if (dist.size() != cmdp.n_contexts)
    throw std::invalid_argument("evaluate_return: distribution size mismatch");
  double total = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    int context = detail::sample_context(dist, rng);
    int s = cmdp.initial_state(context);
    for (int t = 0; t < max_episode_steps && !cmdp.terminal[s]; ++t) {
      int a = policy.sample(s, rng);
      auto [ns, r] = step(cmdp, s, a, context, rng);
      total += r;
      s = ns;
    }
  }
  return total / n_episodes;
}

}  // namespace gradient
