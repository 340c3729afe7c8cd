#include <catch2/catch_amalgamated.hpp>

#include "gradient/curriculum.hpp"
#include "gradient/maze.hpp"

using namespace gradient;

namespace {

MazeCMDP maze5(double gamma = 0.95) {
  return maze_from_layout(MazeLayout::parse("#######\n"
                                            "#G....#\n"
                                            "#.###.#\n"
                                            "#.#...#\n"
                                            "#.#.###\n"
                                            "#.....#\n"
                                            "#######\n"),
                          gamma);
}

// Uniform distribution over contexts whose goal distance lies in [lo, hi].
Categorical band(const MazeCMDP& m, int lo, int hi) {
  auto dist = maze_goal_distances(m);
  Vector w = Vector::Zero(m.cmdp.n_contexts);
  for (int c = 0; c < m.cmdp.n_contexts; ++c) {
    int d = dist[m.cmdp.initial_state(c)];
    if (d >= lo && d <= hi) w[c] = 1.0;
  }
  return Categorical(w / w.sum());
}

CostMatrix context_metric_cost(const MazeCMDP& m) {
  DistanceTable d = exact_metric_deterministic(m.cmdp, value_iteration(m.cmdp).policy,
                                               m.cmdp.gamma);
  Matrix sub(m.cmdp.n_contexts, m.cmdp.n_contexts);
  for (int i = 0; i < m.cmdp.n_contexts; ++i)
    for (int j = 0; j < m.cmdp.n_contexts; ++j)
      sub(i, j) = d.values(m.cmdp.initial_state(i), m.cmdp.initial_state(j));
  return CostMatrix(std::move(sub));
}

}  // namespace

TEST_CASE("config validation") {
  CurriculumConfig c;
  c.validate();
  c.delta_alpha = 0.0;
  REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
  c.delta_alpha = 0.01;
  c.max_stages = 50;  // cannot reach alpha = 1
  REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
  c.max_stages = 101;
  c.validate();
}

TEST_CASE("baseline samplers") {
  Categorical mu = Categorical::dirac(5, 0);
  Categorical nu = Categorical::dirac(5, 4);

  REQUIRE(total_variation(baseline_sampler(CurriculumMethod::Linear, mu, nu, 0.0), mu) == 0.0);
  REQUIRE(total_variation(baseline_sampler(CurriculumMethod::NoCurriculum, mu, nu, 0.3), nu) ==
          0.0);

  // The mixture of two point masses never covers intermediate cells.
  Categorical mix = baseline_sampler(CurriculumMethod::Linear, mu, nu, 0.5);
  REQUIRE(mix.weights[0] == 0.5);
  REQUIRE(mix.weights[4] == 0.5);
  REQUIRE(mix.weights.segment(1, 3).isZero());

  MazeCMDP m = maze_from_layout(MazeLayout::load(std::string(DATA_DIR) + "/maze11.txt"), 0.99);
  Categorical u = baseline_sampler(CurriculumMethod::DomainRandomization,
                                   Categorical::uniform(m.cmdp.n_contexts),
                                   Categorical::uniform(m.cmdp.n_contexts), 0.0);
  REQUIRE(u.size() == 51);
  REQUIRE(u.weights.isConstant(1.0 / 51.0));

  REQUIRE_THROWS_AS(baseline_sampler(CurriculumMethod::Linear, mu, nu, 1.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(baseline_sampler(CurriculumMethod::Gradient, mu, nu, 0.5),
                    std::invalid_argument);
}

TEST_CASE("particle mixture baseline") {
  Matrix a(2, 2), b(1, 2);
  a << 0, 0, 1, 0;
  b << 5, 5;
  Particles mu(a), nu(b);
  Particles mix = linear_mixture(mu, nu, 0.25);
  REQUIRE(mix.size() == 3);
  REQUIRE(mix.weights[0] == Catch::Approx(0.375));
  REQUIRE(mix.weights[2] == Catch::Approx(0.25));
  REQUIRE(linear_mixture(mu, nu, 0.0).size() == 2);
  REQUIRE(linear_mixture(mu, nu, 1.0).size() == 1);
}

TEST_CASE("time to threshold") {
  // Starts above: first recorded step wins.
  REQUIRE(time_to_threshold({{100, -5.0}, {200, -4.0}}, -10.0) == 100);
  // Crossing between samples: the first sample at/above, no interpolation.
  std::vector<CurvePoint> curve;
  for (int i = 0; i < 30; ++i) curve.push_back({1000L * (i + 1), -30.0 + i});
  long t = time_to_threshold(curve, -10.0);
  // Rolling window 10: mean of the last 10 points must reach -10.
  bool found = false;
  for (size_t i = 0; i < curve.size() && !found; ++i) {
    size_t lo = i + 1 >= 10 ? i + 1 - 10 : 0;
    double mean = 0.0;
    for (size_t j = lo; j <= i; ++j) mean += curve[j].eval_return;
    mean /= double(i - lo + 1);
    if (mean >= -10.0) {
      REQUIRE(t == curve[i].env_steps);
      found = true;
    }
  }
  REQUIRE(found);
  // All below: not reached.
  REQUIRE(time_to_threshold({{1, -99.0}, {2, -98.0}}, -10.0) == kNotReached);
  REQUIRE_THROWS_AS(time_to_threshold({{5, 0.0}, {1, 0.0}}, -1.0), std::invalid_argument);
}

TEST_CASE("stage alphas follow min(k delta, 1)") {
  MazeCMDP m = maze5();
  CostMatrix cost = context_metric_cost(m);
  CurriculumConfig ccfg;
  ccfg.delta_alpha = 0.5;
  ccfg.max_stages = 10;
  ccfg.reward_threshold = -12.0;
  ccfg.max_rounds_per_stage = 60;
  LearnerConfig lcfg;
  lcfg.max_episode_steps = 48;
  lcfg.epsilon_decay_episodes = 400;

  Categorical mu = band(m, 1, 2), nu = band(m, 5, 9);
  Rng rng(3);
  CurriculumResult res =
      curriculum_run(m.cmdp, mu, nu, CurriculumMethod::Gradient, ccfg, lcfg, cost, rng);
  REQUIRE(res.trace.stages.size() == 3);
  REQUIRE(res.trace.stages[0].alpha == 0.0);
  REQUIRE(res.trace.stages[1].alpha == 0.5);
  REQUIRE(res.trace.stages[2].alpha == 1.0);
  res.trace.check_accounting();

  // Endpoint fidelity.
  REQUIRE(total_variation(res.trace.stages.front().distribution, mu) <= 1e-4);
  REQUIRE(total_variation(res.trace.stages.back().distribution, nu) <= 1e-4);
}

TEST_CASE("identical marginals give a constant curriculum") {
  MazeCMDP m = maze5();
  CostMatrix cost = context_metric_cost(m);
  Categorical nu = band(m, 1, 9);
  for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
    Categorical rho = gradient_stage_distribution(nu, nu, alpha, cost);
    REQUIRE(total_variation(rho, nu) <= 1e-4);
  }
}

TEST_CASE("geodesic stages approach the target monotonically") {
  MazeCMDP m = maze_from_layout(MazeLayout::load(std::string(DATA_DIR) + "/maze11.txt"), 0.99);
  CostMatrix cost = context_metric_cost(m);
  Categorical mu = band(m, 1, 1), nu = band(m, 11, 13);

  const double dalpha = 0.25;
  std::vector<Categorical> stages;
  for (int k = 0; k <= 4; ++k)
    stages.push_back(gradient_stage_distribution(mu, nu, std::min(1.0, k * dalpha), cost));

  double w_total = wasserstein_distance(mu, nu, cost);
  REQUIRE(w_total > 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (const Categorical& rho : stages) {
    double w = wasserstein_distance(rho, nu, cost);
    REQUIRE(w <= prev + 1e-6);
    prev = w;
  }
  // Constant-speed spacing between consecutive stages, entropic tolerance.
  for (size_t k = 0; k + 1 < stages.size(); ++k) {
    double w = wasserstein_distance(stages[k], stages[k + 1], cost);
    REQUIRE(w == Catch::Approx(dalpha * w_total).epsilon(0.10));
  }
}

TEST_CASE("transfer gap audit basics") {
  MazeCMDP m = maze5();
  CostMatrix cost = context_metric_cost(m);
  Categorical mu = band(m, 1, 2), nu = band(m, 5, 9);

  // Identical consecutive stages: zero gap, zero distance.
  auto rows = transfer_gap_audit(m.cmdp, {nu, nu}, cost);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].gap == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(rows[0].w == Catch::Approx(0.0).margin(1e-9));

  // Gap is nonnegative along any stage sequence.
  std::vector<Categorical> stages;
  for (int k = 0; k <= 4; ++k)
    stages.push_back(gradient_stage_distribution(mu, nu, 0.25 * k, cost));
  for (const AuditRow& r : transfer_gap_audit(m.cmdp, stages, cost)) {
    REQUIRE(r.gap >= -1e-9);
    REQUIRE(r.w >= 0.0);
  }
  REQUIRE_THROWS_AS(transfer_gap_audit(m.cmdp, {nu}, cost), std::invalid_argument);
}

TEST_CASE("gradient run completes and learns on a small maze") {
  MazeCMDP m = maze5();
  CostMatrix cost = context_metric_cost(m);
  CurriculumConfig ccfg;
  ccfg.delta_alpha = 0.34;
  ccfg.max_stages = 10;
  ccfg.reward_threshold = -10.0;
  ccfg.max_rounds_per_stage = 80;
  LearnerConfig lcfg;
  lcfg.max_episode_steps = 48;
  lcfg.epsilon_decay_episodes = 500;

  Categorical mu = band(m, 1, 2), nu = band(m, 5, 9);
  Rng rng(11);
  CurriculumResult res =
      curriculum_run(m.cmdp, mu, nu, CurriculumMethod::Gradient, ccfg, lcfg, cost, rng);
  REQUIRE(res.trace.completed);
  for (size_t k = 1; k < res.trace.stages.size(); ++k)
    REQUIRE(res.trace.stages[k].alpha >= res.trace.stages[k - 1].alpha);
  REQUIRE(res.trace.stages.back().alpha == 1.0);
  REQUIRE_FALSE(res.trace.curve.empty());
  REQUIRE(time_to_threshold(res.trace.curve, ccfg.reward_threshold) != kNotReached);

  // The warm-started greedy policy masters the target contexts.
  Rng eval(77);
  REQUIRE(evaluate_return(m.cmdp, res.policy, nu, 30, 48, eval) > ccfg.reward_threshold);
}

TEST_CASE("runs are deterministic under a fixed seed") {
  MazeCMDP m = maze5();
  CostMatrix cost = context_metric_cost(m);
  CurriculumConfig ccfg;
  ccfg.delta_alpha = 0.5;
  ccfg.max_stages = 5;
  ccfg.reward_threshold = -10.0;
  ccfg.max_rounds_per_stage = 40;
  LearnerConfig lcfg;
  lcfg.max_episode_steps = 48;
  lcfg.epsilon_decay_episodes = 300;
  Categorical mu = band(m, 1, 2), nu = band(m, 5, 9);

  auto run = [&]() {
    Rng rng(123);
    return curriculum_run(m.cmdp, mu, nu, CurriculumMethod::Linear, ccfg, lcfg, cost, rng);
  };
  CurriculumResult a = run(), b = run();
  REQUIRE(a.q.values == b.q.values);
  REQUIRE(a.trace.total_env_steps == b.trace.total_env_steps);
  REQUIRE(a.trace.curve.size() == b.trace.curve.size());
  for (size_t i = 0; i < a.trace.curve.size(); ++i) {
    REQUIRE(a.trace.curve[i].env_steps == b.trace.curve[i].env_steps);
    REQUIRE(a.trace.curve[i].eval_return == b.trace.curve[i].eval_return);
  }
}

#include "gradient/curriculum_embed.hpp"

namespace {

ContextMetric sq_l2_metric() {
  return [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    return (a - b).squaredNorm();
  };
}

}  // namespace

TEST_CASE("latent interpolation with a distance-faithful embedding matches raw space") {
  Rng rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix pool(128, 2);
  for (int i = 0; i < pool.size(); ++i) pool.data()[i] = u(rng);
  EmbedTrainConfig ecfg;
  ecfg.seed = 3;
  ecfg.epochs = 1000;
  ecfg.n_pairs = 256;
  ecfg.lambda = 1.0;
  EmbedTrainReport rep = train_embedding(pool, sq_l2_metric(), ecfg);

  Matrix ma(3, 2), mb(3, 2);
  ma << -0.8, -0.6, -0.7, -0.8, -0.9, -0.7;
  mb << 0.8, 0.7, 0.6, 0.8, 0.9, 0.6;
  Particles mu(ma), nu(mb);
  ContextMetric l2m = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    return (a - b).norm();
  };
  double scale = wasserstein_distance(mu, nu, l2m);
  for (double alpha : {0.25, 0.5, 0.75}) {
    Particles raw = barycenter_free_support(mu, nu, alpha, sq_l2_metric());
    Particles via = embedded_interpolation(rep.params, mu, nu, alpha);
    REQUIRE(wasserstein_distance(raw, via, l2m) <= 0.05 * scale);
  }

  // Small alpha keeps the interpolant near the source cloud.
  Particles early = embedded_interpolation(rep.params, mu, nu, 0.1);
  REQUIRE(wasserstein_distance(early, mu, l2m) < wasserstein_distance(early, nu, l2m));
}

TEST_CASE("embedded curriculum stage zero trains on the source and rolls forward") {
  GoalField field = GoalField::u_corridor();
  Matrix ma(2, 2), mb(2, 2);
  ma << 1.5, 2.5, 2.5, 1.5;        // easy goals next to the origin
  mb << 3.5, 2.5, 3.5, 3.5;        // slightly farther, same side of the wall
  Particles mu(ma), nu(mb);

  EmbeddedCurriculumConfig cfg;
  cfg.base.delta_alpha = 0.5;
  cfg.base.max_stages = 5;
  cfg.base.reward_threshold = -10.0;
  cfg.base.max_rounds_per_stage = 60;
  cfg.embed.epochs = 200;
  cfg.embed.n_pairs = 128;
  cfg.min_model_samples = 50;
  cfg.pool_size = 64;
  LearnerConfig lcfg;
  lcfg.epsilon_decay_episodes = 600;

  Rng rng(7);
  EmbedCurriculumResult res = gradient_with_embedding(field, mu, nu, cfg, lcfg, rng);
  REQUIRE(res.trace.stages.size() == 3);
  REQUIRE(res.trace.stages[0].alpha == 0.0);
  REQUIRE(res.trace.stages[0].distribution.points == mu.points);
  REQUIRE_FALSE(res.trace.stages[0].used_fallback);
  REQUIRE(res.trace.stages[2].distribution.points == nu.points);
  REQUIRE_FALSE(res.trace.curve.empty());

  long sum = 0;
  for (const auto& s : res.trace.stages) sum += s.env_steps;
  REQUIRE(sum == res.trace.total_env_steps);

  // The mid stage used the fitted return model and the embedding path.
  const EmbedStageRecord& mid = res.trace.stages[1];
  REQUIRE(mid.model_samples >= cfg.min_model_samples);
  REQUIRE_FALSE(mid.used_fallback);
  REQUIRE(mid.distribution.points.allFinite());
  mid.distribution.validate();
}

TEST_CASE("embedded curriculum falls back when the model has too few samples") {
  GoalField field = GoalField::u_corridor();
  Matrix ma(1, 2), mb(1, 2);
  ma << 1.5, 2.5;
  mb << 3.5, 2.5;
  Particles mu(ma), nu(mb);

  EmbeddedCurriculumConfig cfg;
  cfg.base.delta_alpha = 0.5;
  cfg.base.max_stages = 5;
  cfg.base.reward_threshold = -10.0;
  cfg.base.max_rounds_per_stage = 20;
  cfg.min_model_samples = 1000000;  // unreachable: every mid stage must fall back
  cfg.pool_size = 16;
  LearnerConfig lcfg;
  lcfg.epsilon_decay_episodes = 300;

  Rng rng(9);
  EmbedCurriculumResult res = gradient_with_embedding(field, mu, nu, cfg, lcfg, rng);
  REQUIRE(res.trace.stages.size() == 3);
  REQUIRE(res.trace.stages[1].used_fallback);
}

TEST_CASE("embedded curriculum is deterministic under a fixed seed") {
  GoalField field = GoalField::u_corridor();
  Matrix ma(1, 2), mb(1, 2);
  ma << 1.5, 2.5;
  mb << 3.5, 3.5;
  Particles mu(ma), nu(mb);

  EmbeddedCurriculumConfig cfg;
  cfg.base.delta_alpha = 0.5;
  cfg.base.max_stages = 5;
  cfg.base.reward_threshold = -10.0;
  cfg.base.max_rounds_per_stage = 15;
  cfg.embed.epochs = 50;
  cfg.embed.n_pairs = 64;
  cfg.min_model_samples = 50;
  cfg.pool_size = 32;
  LearnerConfig lcfg;
  lcfg.epsilon_decay_episodes = 200;

  auto run = [&]() {
    Rng rng(1234);
    return gradient_with_embedding(field, mu, nu, cfg, lcfg, rng);
  };
  EmbedCurriculumResult a = run(), b = run();
  REQUIRE(a.q.values == b.q.values);
  REQUIRE(a.trace.total_env_steps == b.trace.total_env_steps);
  REQUIRE(a.trace.stages.size() == b.trace.stages.size());
  for (size_t k = 0; k < a.trace.stages.size(); ++k)
    REQUIRE(a.trace.stages[k].distribution.points == b.trace.stages[k].distribution.points);
}
