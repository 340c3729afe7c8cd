#pragma once

#include <optional>

#include "gradient/barycenter.hpp"
#include "gradient/learner.hpp"
#include "gradient/metrics.hpp"
#include "gradient/wasserstein.hpp"

namespace gradient {

enum class CurriculumMethod { Gradient, NoCurriculum, DomainRandomization, Linear };

inline const char* method_name(CurriculumMethod m) {
  switch (m) {
    case CurriculumMethod::Gradient: return "gradient";
    case CurriculumMethod::NoCurriculum: return "no_curriculum";
    case CurriculumMethod::DomainRandomization: return "domain_randomization";
    case CurriculumMethod::Linear: return "linear";
  }
  return "?";
}

struct CurriculumConfig {
  double delta_alpha = 0.1;       // interpolation increment per stage
  double reward_threshold = -15.0;  // stage-advance training-return threshold
  int max_stages = 100;           // hard cap on the number of stages
  int max_rounds_per_stage = 200;  // escape hatch for non-clearing stages
  SinkhornConfig barycenter{};    // entropic solver for stage distributions
  int eval_episodes = 30;         // target-evaluation protocol size
  long eval_every_steps = 1000;   // learning-curve cadence in environment steps
  bool reset_exploration_each_stage = true;

  void validate() const {
    if (delta_alpha <= 0.0 || delta_alpha > 1.0)
      throw std::invalid_argument("CurriculumConfig: delta_alpha in (0,1] required");
    if (max_stages < static_cast<int>(std::ceil(1.0 / delta_alpha)))
      throw std::invalid_argument("CurriculumConfig: max_stages too small for alpha to reach 1");
    if (max_rounds_per_stage < 1 || eval_episodes < 1 || eval_every_steps < 1)
      throw std::invalid_argument("CurriculumConfig: positive budgets required");
  }
};

struct StageRecord {
  double alpha = 0.0;
  Categorical distribution{Vector::Ones(1)};
  long env_steps = 0;       // training steps spent inside this stage
  int rounds = 0;
  double final_G = 0.0;     // last round-mean training return
  double eval_return = 0.0;  // greedy-policy return on the target distribution
  bool cleared = false;     // G exceeded the threshold within the stage budget
};

struct CurvePoint {
  long env_steps = 0;
  double eval_return = 0.0;
};

struct CurriculumTrace {
  std::vector<StageRecord> stages;
  std::vector<CurvePoint> curve;  // cumulative training steps vs target return
  long total_env_steps = 0;
  bool completed = false;  // the final (target) stage cleared the threshold

  void check_accounting() const {
    long sum = 0;
    for (const auto& s : stages) sum += s.env_steps;
    if (sum != total_env_steps) throw std::runtime_error("CurriculumTrace: step accounting drift");
  }
};

struct CurriculumResult {
  QTable q;
  Policy policy{};
  CurriculumTrace trace;
};

/// The named baseline stage distribution: the target itself, the uniform
/// context distribution, or the pointwise mixture (1-alpha) mu + alpha nu.
inline Categorical baseline_sampler(CurriculumMethod kind, const Categorical& mu,
                                    const Categorical& nu, double alpha) {
  if (mu.size() != nu.size())
    throw std::invalid_argument("baseline_sampler: marginal size mismatch");
  switch (kind) {
    case CurriculumMethod::NoCurriculum: return nu;
    case CurriculumMethod::DomainRandomization: return Categorical::uniform(nu.size());
    case CurriculumMethod::Linear: {
      if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("baseline_sampler: alpha in [0,1] required");
      return Categorical((1.0 - alpha) * mu.weights + alpha * nu.weights);
    }
    case CurriculumMethod::Gradient: break;
  }
  throw std::invalid_argument("baseline_sampler: use gradient_run for the geodesic curriculum");
}

/// Mixture of two particle clouds with weights (1-alpha, alpha).
inline Particles linear_mixture(const Particles& mu, const Particles& nu, double alpha) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("linear_mixture: dimension mismatch");
  if (alpha <= 0.0) return mu;
  if (alpha >= 1.0) return nu;
  Particles out;
  out.points.resize(mu.size() + nu.size(), mu.dim());
  out.points << mu.points, nu.points;
  out.weights.resize(mu.size() + nu.size());
  out.weights << (1.0 - alpha) * mu.weights, alpha * nu.weights;
  return out;
}

namespace detail {

/// Stage distribution of the geodesic curriculum over a discrete context set:
/// debiased entropic barycenter under the squared contextual ground metric.
inline Categorical geodesic_stage(const Categorical& mu, const Categorical& nu, double alpha,
                                  const CostMatrix& sq_cost, const SinkhornConfig& cfg) {
  if (alpha <= 0.0) return mu;
  if (alpha >= 1.0) return nu;
  SinkhornConfig bc = cfg;
  bc.debiased = true;
  BarycenterResult r = barycenter_fixed_support(mu, nu, alpha, sq_cost, bc);
  if (!r.converged) throw std::runtime_error("geodesic_stage: barycenter failed to converge");
  return r.rho;
}

}  // namespace detail

/// Squares a context-pair cost matrix (ground metric -> barycenter cost).
inline CostMatrix squared_cost(const CostMatrix& C) {
  return CostMatrix(C.entries.array().square().matrix());
}

/// Stage distribution of the geodesic curriculum at a given alpha, under the
/// (unsquared) contextual ground metric.
inline Categorical gradient_stage_distribution(const Categorical& mu, const Categorical& nu,
                                               double alpha, const CostMatrix& context_cost,
                                               const SinkhornConfig& cfg = {}) {
  return detail::geodesic_stage(mu, nu, alpha, squared_cost(context_cost), cfg);
}

/// One curriculum training run over a discrete context set. The geodesic
/// method interpolates stage distributions along the entropic barycenter path
/// under context_cost; baselines use their fixed samplers. The Q-table warm
/// starts across stages and is never reinitialized.
inline CurriculumResult curriculum_run(const TabularCMDP& cmdp, const Categorical& mu,
                                       const Categorical& nu, CurriculumMethod method,
                                       const CurriculumConfig& ccfg, const LearnerConfig& lcfg,
                                       const CostMatrix& context_cost, Rng& rng) {
  ccfg.validate();
  lcfg.validate();
  mu.validate();
  nu.validate();
  if (mu.size() != cmdp.n_contexts || nu.size() != cmdp.n_contexts)
    throw std::invalid_argument("curriculum_run: marginals must cover the context set");
  if (method == CurriculumMethod::Gradient &&
      (context_cost.rows() != cmdp.n_contexts || context_cost.cols() != cmdp.n_contexts))
    throw std::invalid_argument("curriculum_run: context cost shape mismatch");

  const bool staged =
      method == CurriculumMethod::Gradient || method == CurriculumMethod::Linear;
  CostMatrix bary_cost =
      method == CurriculumMethod::Gradient ? squared_cost(context_cost) : context_cost;

  CurriculumResult out;
  out.q = QTable::zeros(cmdp.n_states, cmdp.n_actions);
  Rng eval_rng(rng());
  long next_eval = 0;

  const int n_stages =
      staged ? std::min(ccfg.max_stages,
                        static_cast<int>(std::ceil(1.0 / ccfg.delta_alpha - 1e-12)) + 1)
             : 1;
  for (int k = 0; k < n_stages; ++k) {
    StageRecord stage;
    stage.alpha = staged ? std::min(k * ccfg.delta_alpha, 1.0) : 1.0;
    switch (method) {
      case CurriculumMethod::Gradient:
        stage.distribution =
            detail::geodesic_stage(mu, nu, stage.alpha, bary_cost, ccfg.barycenter);
        break;
      case CurriculumMethod::Linear:
        stage.distribution = baseline_sampler(method, mu, nu, stage.alpha);
        break;
      default:
        stage.distribution = baseline_sampler(method, mu, nu, 1.0);
    }
    if (ccfg.reset_exploration_each_stage) out.q.episodes = 0;

    for (int round = 0; round < ccfg.max_rounds_per_stage; ++round) {
      RoundResult r = q_learning_round(cmdp, stage.distribution, out.q, lcfg, rng);
      stage.env_steps += r.env_steps;
      stage.rounds = round + 1;
      stage.final_G = r.mean_return;
      long cumulative = out.trace.total_env_steps + stage.env_steps;
      if (cumulative >= next_eval || r.mean_return > ccfg.reward_threshold) {
        stage.eval_return = evaluate_return(cmdp, greedy_policy(out.q), nu, ccfg.eval_episodes,
                                            lcfg.max_episode_steps, eval_rng);
        out.trace.curve.push_back({cumulative, stage.eval_return});
        next_eval = (cumulative / ccfg.eval_every_steps + 1) * ccfg.eval_every_steps;
      }
      if (r.has_return && r.mean_return > ccfg.reward_threshold) {
        stage.cleared = true;
        break;
      }
    }
    out.trace.total_env_steps += stage.env_steps;
    out.trace.stages.push_back(std::move(stage));
    // The target stage must itself clear the threshold for a completed run.
    bool is_final = !staged || out.trace.stages.back().alpha >= 1.0;
    if (is_final) {
      out.trace.completed = out.trace.stages.back().cleared;
      break;
    }
  }
  out.policy = greedy_policy(out.q);
  out.trace.check_accounting();
  return out;
}

constexpr long kNotReached = -1;

/// First cumulative step count whose trailing rolling-mean return (window 10,
/// shorter at the start) meets the threshold; kNotReached if never.
inline long time_to_threshold(const std::vector<CurvePoint>& curve, double threshold,
                              int window = 10) {
  if (window < 1) throw std::invalid_argument("time_to_threshold: positive window required");
  for (size_t i = 1; i < curve.size(); ++i)
    if (curve[i].env_steps < curve[i - 1].env_steps)
      throw std::invalid_argument("time_to_threshold: steps must be nondecreasing");
  for (size_t i = 0; i < curve.size(); ++i) {
    size_t lo = i + 1 >= static_cast<size_t>(window) ? i + 1 - window : 0;
    double mean = 0.0;
    for (size_t j = lo; j <= i; ++j) mean += curve[j].eval_return;
    mean /= double(i - lo + 1);
    if (mean >= threshold) return curve[i].env_steps;
  }
  return kNotReached;
}

struct AuditRow {
  double gap = 0.0;    // value improvement of the next stage-optimal policy
  double w = 0.0;      // transport distance between consecutive stages
  double ratio = 0.0;  // gap / max(w, 1e-12)
};

namespace detail {

/// States reachable from the support of rho under any action sequence.
/// Mass below this plays no role in a stage's effective support: entropic
/// smoothing leaves astronomically small but nonzero weight on every context.
inline constexpr double kAuditSupportFloor = 1e-9;

/// States visited when executing the given policy from the effective support
/// of rho (closure under the policy's own actions, not under all actions).
inline std::vector<char> reachable_states(const TabularCMDP& cmdp, const Categorical& rho,
                                          const Policy& policy) {
  std::vector<char> seen(cmdp.n_states, 0);
  std::vector<int> stack;
  for (int c = 0; c < rho.size(); ++c)
    if (rho.weights[c] > kAuditSupportFloor) {
      int s = cmdp.initial_state(c);
      if (!seen[s]) {
        seen[s] = 1;
        stack.push_back(s);
      }
    }
  while (!stack.empty()) {
    int s = stack.back();
    stack.pop_back();
    for (int a = 0; a < cmdp.n_actions; ++a) {
      if (policy.probs(s, a) <= 0.0) continue;
      for (int t = 0; t < cmdp.n_states; ++t)
        if (cmdp.transition[a](s, t) > 0.0 && !seen[t]) {
          seen[t] = 1;
          stack.push_back(t);
        }
    }
  }
  return seen;
}

/// Stage-optimal policy: greedy along the optimal trajectories out of rho's
/// support, uniform elsewhere (the proof's completion of the argmax-defined
/// policy, which is unconstrained off the stage distribution).
inline Policy stage_optimal_policy(const TabularCMDP& cmdp, const Categorical& rho,
                                   const Policy& global_greedy) {
  std::vector<char> seen = reachable_states(cmdp, rho, global_greedy);
  Policy p = Policy::uniform(cmdp.n_states, cmdp.n_actions);
  for (int s = 0; s < cmdp.n_states; ++s)
    if (seen[s]) p.probs.row(s) = global_greedy.probs.row(s);
  return p;
}

}  // namespace detail

/// Empirical per-stage transfer audit: gap_k is the value headroom the next
/// stage-optimal policy has over the current one on the next stage
/// distribution, w_k the exact transport distance between the consecutive
/// stage distributions under context_cost.
inline std::vector<AuditRow> transfer_gap_audit(const TabularCMDP& cmdp,
                                                const std::vector<Categorical>& stages,
                                                const CostMatrix& context_cost) {
  if (stages.size() < 2)
    throw std::invalid_argument("transfer_gap_audit: need at least two stages");
  if (context_cost.rows() != cmdp.n_contexts || context_cost.cols() != cmdp.n_contexts)
    throw std::invalid_argument("transfer_gap_audit: context cost shape mismatch");
  Policy global_greedy = value_iteration(cmdp).policy;

  std::vector<Vector> values(stages.size());
  for (size_t k = 0; k < stages.size(); ++k) {
    Policy pk = detail::stage_optimal_policy(cmdp, stages[k], global_greedy);
    values[k] = policy_evaluation_values(cmdp, pk);
  }
  auto expected_value = [&](const Vector& V, const Categorical& rho) {
    double v = 0.0;
    for (int c = 0; c < rho.size(); ++c)
      v += rho.weights[c] * V[cmdp.initial_state(c)];
    return v;
  };

  std::vector<AuditRow> out;
  for (size_t k = 0; k + 1 < stages.size(); ++k) {
    AuditRow row;
    row.gap = expected_value(values[k + 1], stages[k + 1]) -
              expected_value(values[k], stages[k + 1]);
    row.w = wasserstein_distance(stages[k], stages[k + 1], context_cost);
    row.ratio = row.gap / std::max(row.w, 1e-12);
    out.push_back(row);
  }
  return out;
}

}  // namespace gradient
