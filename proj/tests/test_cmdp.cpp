#include <catch2/catch_amalgamated.hpp>

#include "gradient/goal_field.hpp"
#include "gradient/maze.hpp"

using namespace gradient;

namespace {

MazeLayout corridor3() {
  // 1x3 corridor with goal at the east end, padded by walls.
  return MazeLayout::parse(
      "#####\n"
      "#..G#\n"
      "#####\n",
      /*goal_is_start=*/true);
}

}  // namespace

TEST_CASE("corridor layout builds a 3-state chain") {
  MazeCMDP m = maze_from_layout(corridor3(), 0.9);
  REQUIRE(m.cmdp.n_states == 3);
  REQUIRE(m.cmdp.n_actions == 4);
  REQUIRE(m.cmdp.n_contexts == 3);  // goal is a legal start here
  REQUIRE(m.cmdp.assumption1);
  REQUIRE(m.cmdp.deterministic());
  m.cmdp.validate();

  // States are row-major over non-wall cells: 0 and 1 free, 2 goal.
  REQUIRE(m.goal_state == 2);
  // East chains 0 -> 1 -> 2; goal absorbing.
  REQUIRE(m.cmdp.successor(0, 3) == 1);
  REQUIRE(m.cmdp.successor(1, 3) == 2);
  REQUIRE(m.cmdp.successor(2, 3) == 2);
  // Step into the goal pays goal_reward, other moves pay step_reward.
  REQUIRE(m.cmdp.reward_at(1, 3, 0) == 0.0);
  REQUIRE(m.cmdp.reward_at(0, 3, 0) == -1.0);
}

TEST_CASE("corridor without the goal flag exposes two contexts") {
  MazeLayout lay = MazeLayout::parse(
      "#####\n"
      "#..G#\n"
      "#####\n");
  MazeCMDP m = maze_from_layout(lay, 0.9);
  REQUIRE(enumerate_contexts(m.cmdp) == std::vector<int>{0, 1});
  REQUIRE(m.cmdp.initial_state(0) == 0);
  REQUIRE(m.cmdp.initial_state(1) == 1);
}

TEST_CASE("reference 11x11 layout has 51 contexts") {
  MazeCMDP m = maze_from_layout(MazeLayout::load(std::string(DATA_DIR) + "/maze11.txt"), 0.99);
  REQUIRE(m.cmdp.n_contexts == 51);
  REQUIRE(m.cmdp.n_states == 52);  // free cells plus goal
  REQUIRE(m.layout.height == 11);
  REQUIRE(m.layout.width == 11);

  auto dist = maze_goal_distances(m);
  for (int s = 0; s < m.cmdp.n_states; ++s) REQUIRE(dist[s] >= 0);  // connected

  Matrix pos = m.context_positions();
  REQUIRE(pos.rows() == 51);
  REQUIRE(pos.cols() == 2);
}

TEST_CASE("layout validation rejects bad grids") {
  // Enclosed free cell unreachable from the goal.
  REQUIRE_THROWS_AS(MazeLayout::parse("#####\n"
                                      "#G#.#\n"
                                      "#####\n"),
                    std::invalid_argument);
  // Ragged rows.
  REQUIRE_THROWS_AS(MazeLayout::parse("####\n"
                                      "#G#\n"
                                      "####\n"),
                    std::invalid_argument);
  // Zero or multiple goals.
  REQUIRE_THROWS_AS(MazeLayout::parse("###\n#.#\n###\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(MazeLayout::parse("####\n#GG#\n####\n"), std::invalid_argument);
  // Unknown character.
  REQUIRE_THROWS_AS(MazeLayout::parse("###\n#G#\n#?#\n###\n"), std::invalid_argument);
}

TEST_CASE("wall bumps keep position and goal is absorbing") {
  MazeCMDP m = maze_from_layout(corridor3(), 0.9);
  Rng rng(7);
  // North from cell 0 hits a wall: same cell, step_reward.
  auto [s1, r1] = step(m.cmdp, 0, 0, 0, rng);
  REQUIRE(s1 == 0);
  REQUIRE(r1 == -1.0);
  // East from cell 1 enters the goal: goal_reward.
  auto [s2, r2] = step(m.cmdp, 1, 3, 0, rng);
  REQUIRE(s2 == m.goal_state);
  REQUIRE(r2 == 0.0);
  // Any action at the goal stays there at goal_reward.
  for (int a = 0; a < 4; ++a) {
    auto [s3, r3] = step(m.cmdp, m.goal_state, a, 0, rng);
    REQUIRE(s3 == m.goal_state);
    REQUIRE(r3 == 0.0);
  }
  // Out-of-range indices are rejected.
  REQUIRE_THROWS_AS(step(m.cmdp, 3, 0, 0, rng), std::out_of_range);
  REQUIRE_THROWS_AS(step(m.cmdp, 0, 4, 0, rng), std::out_of_range);
  REQUIRE_THROWS_AS(step(m.cmdp, 0, 0, 5, rng), std::out_of_range);
}

TEST_CASE("deterministic transitions are rng-independent") {
  MazeCMDP m = maze_from_layout(MazeLayout::load(std::string(DATA_DIR) + "/maze11.txt"), 0.99);
  Rng a(1), b(999);
  for (int s = 0; s < m.cmdp.n_states; ++s)
    for (int act = 0; act < 4; ++act)
      REQUIRE(step(m.cmdp, s, act, 0, a).first == step(m.cmdp, s, act, 0, b).first);
}

TEST_CASE("homogeneity holds across contexts") {
  MazeCMDP m = maze_from_layout(corridor3(), 0.9);
  for (int s = 0; s < m.cmdp.n_states; ++s)
    for (int a = 0; a < m.cmdp.n_actions; ++a)
      for (int c = 1; c < m.cmdp.n_contexts; ++c) {
        REQUIRE(m.cmdp.reward_at(s, a, c) == m.cmdp.reward_at(s, a, 0));
        REQUIRE((m.cmdp.transition_row(s, a, c) - m.cmdp.transition_row(s, a, 0)).norm() == 0.0);
      }
}

TEST_CASE("goal field episodes follow the rollout contract") {
  GoalField f;
  f.bounds = {{0.0, 0.0}, {10.0, 1.0}};
  f.origin = {0.5, 0.5};
  f.goal_radius = 0.4;
  f.max_steps = 20;
  f.step_penalty = -1.0;
  f.validate();
  Rng rng(3);

  SECTION("goal already inside the radius ends immediately") {
    auto out = goal_field_episode(f, [](int, int, Rng&) { return 4; }, {0.6, 0.5}, rng);
    REQUIRE(out.reached);
    REQUIRE(out.steps == 0);
    REQUIRE(out.episodic_return == 0.0);
  }

  SECTION("stay policy never reaches and pays the full budget") {
    auto out = goal_field_episode(f, [](int, int, Rng&) { return 4; }, {9.5, 0.5}, rng);
    REQUIRE_FALSE(out.reached);
    REQUIRE(out.steps == f.max_steps);
    REQUIRE(out.episodic_return == f.step_penalty * f.max_steps);
  }

  SECTION("greedy eastward walk to a goal five cells east returns -5") {
    auto out = goal_field_episode(f, [](int, int, Rng&) { return 3; }, {5.5, 0.5}, rng);
    REQUIRE(out.reached);
    REQUIRE(out.steps == 5);
    REQUIRE(out.episodic_return == -5.0);
  }

  SECTION("goal outside the bounds is rejected") {
    REQUIRE_THROWS_AS(
        goal_field_episode(f, [](int, int, Rng&) { return 4; }, {11.0, 0.5}, rng),
        std::invalid_argument);
  }
}

TEST_CASE("goal field validation") {
  GoalField f = GoalField::u_corridor();
  f.validate();
  f.goal_radius = 0.0;
  REQUIRE_THROWS_AS(f.validate(), std::invalid_argument);
  f.goal_radius = 1e9;
  REQUIRE_THROWS_AS(f.validate(), std::invalid_argument);
}

TEST_CASE("u-corridor obstacle blocks the straight path") {
  GoalField f = GoalField::u_corridor();
  // Cells inside the obstacle box are blocked; just outside they are free.
  REQUIRE(f.blocked_point({4.5, 3.0}));
  REQUIRE_FALSE(f.blocked_point({3.5, 3.0}));
  REQUIRE_FALSE(f.blocked_point({4.5, 7.0}));

  // Path distance detours over the wall: much longer than straight-line.
  ContextMetric d = grid_path_distance_metric(f);
  Vector a(2), b(2);
  a << 2.5, 1.5;
  b << 6.5, 1.5;
  double straight = (a - b).norm();
  REQUIRE(d(a, b) > straight + 4.0);
  REQUIRE(d(a, a) == 0.0);
  REQUIRE(d(a, b) == d(b, a));
}
