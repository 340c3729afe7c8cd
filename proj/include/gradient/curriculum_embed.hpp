#pragma once

#include <deque>

#include "gradient/curriculum.hpp"
#include "gradient/embed.hpp"
#include "gradient/goal_field.hpp"

namespace gradient {

/// Latent-space stage interpolation: encode both clouds, take the free-support
/// geodesic point under squared Euclidean cost in latent space, decode.
inline Particles embedded_interpolation(const MLPParams& params, const Particles& mu,
                                        const Particles& nu, double alpha) {
  ContextMetric sq = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    return (a - b).squaredNorm();
  };
  Particles z = barycenter_free_support(encode(params, mu), encode(params, nu), alpha, sq);
  return decode(params, z);
}

/// Goal-conditioned tabular action values on the discretized field:
/// row index = agent_cell * n_cells + goal_cell, five actions.
struct GoalFieldQ {
  Matrix values;
  int n_cells = 0;
  long episodes = 0;

  static GoalFieldQ zeros(const GoalField& field) {
    GoalFieldQ q;
    q.n_cells = field.n_cells();
    q.values = Matrix::Zero(static_cast<long>(q.n_cells) * q.n_cells, 5);
    return q;
  }

  int row(int agent_cell, int goal_cell) const { return agent_cell * n_cells + goal_cell; }

  int greedy_action(int agent_cell, int goal_cell) const {
    int r = row(agent_cell, goal_cell), best = 0;
    for (int a = 1; a < 5; ++a)
      if (values(r, a) > values(r, best)) best = a;
    return best;
  }

  GoalFieldPolicy greedy() const {
    return [this](int agent_cell, int goal_cell, Rng&) {
      return greedy_action(agent_cell, goal_cell);
    };
  }
};

namespace detail {

inline int sample_particle(const Particles& cloud, Rng& rng) {
  double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int i = 0; i < cloud.size(); ++i) {
    acc += cloud.weights[i];
    if (r <= acc) return i;
  }
  return cloud.size() - 1;
}

inline bool goal_reached(const GoalField& field, int cell, const Eigen::Vector2d& goal) {
  return (field.cell_center(cell) - goal).norm() <= field.goal_radius;
}

}  // namespace detail

/// One epsilon-greedy temporal-difference round on the goal field with goals
/// drawn from the stage cloud. Episode samples land in sample_sink when given.
inline RoundResult goal_field_q_round(const GoalField& field, const Particles& stage,
                                      GoalFieldQ& q, const LearnerConfig& cfg, Rng& rng,
                                      std::vector<std::pair<Vector, double>>* sample_sink =
                                          nullptr) {
  cfg.validate();
  stage.validate();
  if (stage.dim() != 2) throw std::invalid_argument("goal_field_q_round: 2D goals required");

  RoundResult out;
  if (cfg.episodes_per_round == 0) return out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> rand_action(0, 4);
  double total = 0.0;
  for (int ep = 0; ep < cfg.episodes_per_round; ++ep) {
    const double eps = cfg.epsilon_at(q.episodes);
    Eigen::Vector2d goal = stage.points.row(detail::sample_particle(stage, rng)).transpose();
    const int goal_cell = field.cell_of(goal);
    int cell = field.cell_of(field.origin);
    double G = 0.0;
    for (int t = 0; t < field.max_steps && !detail::goal_reached(field, cell, goal); ++t) {
      int a = (unif(rng) < eps) ? rand_action(rng) : q.greedy_action(cell, goal_cell);
      int next = goal_field_transition(field, cell, a);
      double r = field.step_penalty;
      double target = r;
      if (!detail::goal_reached(field, next, goal))
        target += field.gamma * q.values.row(q.row(next, goal_cell)).maxCoeff();
      double& qv = q.values(q.row(cell, goal_cell), a);
      qv += cfg.learning_rate * (target - qv);
      cell = next;
      G += r;
      ++out.env_steps;
    }
    if (sample_sink) sample_sink->push_back({Vector(goal), G});
    total += G;
    ++q.episodes;
  }
  out.mean_return = total / cfg.episodes_per_round;
  out.has_return = true;
  return out;
}

/// Mean episodic return of the greedy policy with goals drawn from the cloud.
inline double evaluate_goal_field(const GoalField& field, const GoalFieldQ& q,
                                  const Particles& dist, int n_episodes, Rng& rng) {
  double total = 0.0;
  GoalFieldPolicy pi = q.greedy();
  for (int ep = 0; ep < n_episodes; ++ep) {
    Eigen::Vector2d goal = dist.points.row(detail::sample_particle(dist, rng)).transpose();
    total += goal_field_episode(field, pi, goal, rng).episodic_return;
  }
  return total / n_episodes;
}

struct EmbeddedCurriculumConfig {
  CurriculumConfig base;
  EmbedTrainConfig embed;
  int model_buffer = 1000;       // most recent (goal, return) training samples kept
  int min_model_samples = 50;    // below this the stage falls back to raw space
  int pool_size = 256;           // free-space context pool for embedding training
  double model_bandwidth = 0.0;  // RBF bandwidth; 0 = median pairwise heuristic
  double model_ridge = 1e-6;     // kernel ridge regularizer

  void validate() const {
    base.validate();
    embed.validate();
    if (model_buffer < 1 || min_model_samples < 1 || pool_size < 2)
      throw std::invalid_argument("EmbeddedCurriculumConfig: positive budgets required");
    if (model_bandwidth < 0.0 || model_ridge <= 0.0)
      throw std::invalid_argument(
          "EmbeddedCurriculumConfig: nonnegative bandwidth and positive ridge required");
  }
};

struct EmbedStageRecord {
  double alpha = 0.0;
  Particles distribution{Matrix::Zero(1, 2)};
  long env_steps = 0;
  int rounds = 0;
  double final_G = 0.0;
  double eval_return = 0.0;
  bool cleared = false;
  bool used_fallback = false;  // raw-space interpolation instead of the embedding
  int model_samples = 0;       // reward-model sample count when the stage was built
};

struct EmbedCurriculumTrace {
  std::vector<EmbedStageRecord> stages;
  std::vector<CurvePoint> curve;
  long total_env_steps = 0;
  bool completed = false;
};

struct EmbedCurriculumResult {
  GoalFieldQ q;
  EmbedCurriculumTrace trace;
};

/// Embedding-assisted curriculum on the goal field: each stage fits a return
/// model from recent training episodes, derives the return-gap context metric,
/// trains the distance embedding on it, interpolates source and target in
/// latent space, and decodes the stage goals. The source cloud rolls forward
/// to the latest stage distribution. Model or embedding failures fall back to
/// raw-space interpolation and are flagged in the trace.
inline EmbedCurriculumResult gradient_with_embedding(const GoalField& field, const Particles& mu,
                                                     const Particles& nu,
                                                     const EmbeddedCurriculumConfig& cfg,
                                                     const LearnerConfig& lcfg, Rng& rng) {
  cfg.validate();
  lcfg.validate();
  field.validate();
  mu.validate();
  nu.validate();
  if (mu.dim() != 2 || nu.dim() != 2)
    throw std::invalid_argument("gradient_with_embedding: 2D goal contexts required");

  // Free-space context pool for embedding training, fixed for the whole run.
  Matrix pool(cfg.pool_size, 2);
  {
    std::uniform_real_distribution<double> ux(field.bounds.lo.x(), field.bounds.hi.x());
    std::uniform_real_distribution<double> uy(field.bounds.lo.y(), field.bounds.hi.y());
    int filled = 0;
    long guard = 0;
    while (filled < cfg.pool_size) {
      if (++guard > 100000L * cfg.pool_size)
        throw std::runtime_error("gradient_with_embedding: cannot sample free contexts");
      Eigen::Vector2d p{ux(rng), uy(rng)};
      if (field.blocked_point(p)) continue;
      pool.row(filled++) = p.transpose();
    }
  }

  ContextMetric sq_l2 = [](const Eigen::Ref<const Vector>& a,
                           const Eigen::Ref<const Vector>& b) {
    return (a - b).squaredNorm();
  };

  EmbedCurriculumResult out;
  out.q = GoalFieldQ::zeros(field);
  Rng eval_rng(rng());
  long next_eval = 0;
  std::deque<std::pair<Vector, double>> buffer;
  Particles source = mu;

  const int n_stages =
      std::min(cfg.base.max_stages,
               static_cast<int>(std::ceil(1.0 / cfg.base.delta_alpha - 1e-12)) + 1);
  for (int k = 0; k < n_stages; ++k) {
    EmbedStageRecord stage;
    stage.alpha = std::min(k * cfg.base.delta_alpha, 1.0);
    stage.model_samples = static_cast<int>(buffer.size());

    if (stage.alpha <= 0.0) {
      stage.distribution = mu;  // stage zero trains on the source itself
    } else if (stage.alpha >= 1.0) {
      stage.distribution = nu;
    } else if (stage.model_samples >= cfg.min_model_samples) {
      try {
        Matrix X(buffer.size(), 2);
        Vector y(buffer.size());
        for (size_t i = 0; i < buffer.size(); ++i) {
          X.row(i) = buffer[i].first.transpose();
          y[i] = buffer[i].second;
        }
        auto J = fit_reward_model(X, y, cfg.model_bandwidth, cfg.model_ridge);
        ContextMetric gap = reward_gap_surrogate([J](const Vector& c) { return J(c); });
        EmbedTrainConfig ecfg = cfg.embed;
        ecfg.seed = cfg.embed.seed + static_cast<unsigned long>(k);
        EmbedTrainReport rep = train_embedding(pool, gap, ecfg);
        stage.distribution = embedded_interpolation(rep.params, source, nu, stage.alpha);
      } catch (const std::exception&) {
        stage.used_fallback = true;
        stage.distribution = barycenter_free_support(source, nu, stage.alpha, sq_l2);
      }
    } else {
      stage.used_fallback = true;
      stage.distribution = barycenter_free_support(source, nu, stage.alpha, sq_l2);
    }

    if (cfg.base.reset_exploration_each_stage) out.q.episodes = 0;
    std::vector<std::pair<Vector, double>> sink;
    for (int round = 0; round < cfg.base.max_rounds_per_stage; ++round) {
      sink.clear();
      RoundResult r = goal_field_q_round(field, stage.distribution, out.q, lcfg, rng, &sink);
      for (auto& s : sink) {
        buffer.push_back(std::move(s));
        if (static_cast<int>(buffer.size()) > cfg.model_buffer) buffer.pop_front();
      }
      stage.env_steps += r.env_steps;
      stage.rounds = round + 1;
      stage.final_G = r.mean_return;
      long cumulative = out.trace.total_env_steps + stage.env_steps;
      if (cumulative >= next_eval || r.mean_return > cfg.base.reward_threshold) {
        stage.eval_return =
            evaluate_goal_field(field, out.q, nu, cfg.base.eval_episodes, eval_rng);
        out.trace.curve.push_back({cumulative, stage.eval_return});
        next_eval = (cumulative / cfg.base.eval_every_steps + 1) * cfg.base.eval_every_steps;
      }
      if (r.has_return && r.mean_return > cfg.base.reward_threshold) {
        stage.cleared = true;
        break;
      }
    }

    source = stage.distribution;  // roll the source forward
    out.trace.total_env_steps += stage.env_steps;
    bool is_final = stage.alpha >= 1.0;
    out.trace.stages.push_back(std::move(stage));
    if (is_final) {
      out.trace.completed = out.trace.stages.back().cleared;
      break;
    }
  }
  return out;
}

}  // namespace gradient
