#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "gradient/cmdp.hpp"
#include "gradient/cost_matrix.hpp"

namespace gradient {

/// Axis-aligned 2D box.
struct Box2 {
  Eigen::Vector2d lo, hi;
  bool contains(const Eigen::Vector2d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// Continuous-context goal-reaching field on a discretized 2D grid. The
/// context is the goal position; the agent starts at a fixed origin and walks
/// on grid cells. Obstacle boxes block movement.
struct GoalField {
  Box2 bounds;
  double goal_radius = 0.5;
  int max_steps = 200;
  double step_penalty = -1.0;
  double gamma = 0.99;  // discount for the goal-conditioned learner
  Eigen::Vector2d origin{0.0, 0.0};
  double cell_size = 1.0;
  std::vector<Box2> obstacles;

  int nx() const { return std::max(1, int(std::floor((bounds.hi.x() - bounds.lo.x()) / cell_size))); }
  int ny() const { return std::max(1, int(std::floor((bounds.hi.y() - bounds.lo.y()) / cell_size))); }
  int n_cells() const { return nx() * ny(); }

  int cell_of(const Eigen::Vector2d& p) const {
    int ix = std::clamp(int(std::floor((p.x() - bounds.lo.x()) / cell_size)), 0, nx() - 1);
    int iy = std::clamp(int(std::floor((p.y() - bounds.lo.y()) / cell_size)), 0, ny() - 1);
    return iy * nx() + ix;
  }

  Eigen::Vector2d cell_center(int cell) const {
    int ix = cell % nx(), iy = cell / nx();
    return {bounds.lo.x() + (ix + 0.5) * cell_size, bounds.lo.y() + (iy + 0.5) * cell_size};
  }

  bool blocked_point(const Eigen::Vector2d& p) const {
    for (const auto& b : obstacles)
      if (b.contains(p)) return true;
    return false;
  }
  bool blocked_cell(int cell) const { return blocked_point(cell_center(cell)); }

  void validate() const {
    double diag = (bounds.hi - bounds.lo).norm();
    if (goal_radius <= 0.0 || goal_radius >= diag)
      throw std::invalid_argument("GoalField: goal_radius must be in (0, box diagonal)");
    if (max_steps < 1) throw std::invalid_argument("GoalField: max_steps >= 1 required");
  }

  /// U-shaped corridor: a wall sticking up from the bottom splits the field,
  /// forcing a detour over the top.
  static GoalField u_corridor() {
    GoalField f;
    f.bounds = {{0.0, 0.0}, {9.0, 9.0}};
    f.origin = {1.5, 1.5};
    f.goal_radius = 0.75;
    f.max_steps = 60;
    f.step_penalty = -1.0;
    f.cell_size = 1.0;
    f.obstacles.push_back({{4.0, 0.0}, {5.0, 6.0}});
    f.validate();
    return f;
  }
};

/// Actions of the discretized walker: north, south, west, east, stay.
using GoalFieldPolicy = std::function<int(int agent_cell, int goal_cell, Rng& rng)>;

struct EpisodeOutcome {
  double episodic_return = 0.0;
  int steps = 0;
  bool reached = false;
};

/// Grid successor cell for one walker action; walls and bounds keep position.
inline int goal_field_transition(const GoalField& field, int cell, int action) {
  int ix = cell % field.nx(), iy = cell / field.nx();
  switch (action) {
    case 0: iy += 1; break;  // north
    case 1: iy -= 1; break;  // south
    case 2: ix -= 1; break;  // west
    case 3: ix += 1; break;  // east
    case 4: return cell;     // stay
    default: throw std::out_of_range("goal_field_transition: bad action");
  }
  if (ix < 0 || ix >= field.nx() || iy < 0 || iy >= field.ny()) return cell;
  int cand = iy * field.nx() + ix;
  return field.blocked_cell(cand) ? cell : cand;
}

inline EpisodeOutcome goal_field_episode(const GoalField& field, const GoalFieldPolicy& policy,
                                         const Eigen::Vector2d& goal, Rng& rng) {
  field.validate();
  if (!field.bounds.contains(goal))
    throw std::invalid_argument("goal_field_episode: goal outside bounds");

  const int goal_cell = field.cell_of(goal);
  int cell = field.cell_of(field.origin);
  EpisodeOutcome out;
  for (int t = 0; t < field.max_steps; ++t) {
    if ((field.cell_center(cell) - goal).norm() <= field.goal_radius) {
      out.reached = true;
      break;
    }
    int a = policy(cell, goal_cell, rng);
    cell = goal_field_transition(field, cell, a);
    ++out.steps;
    out.episodic_return += field.step_penalty;
  }
  if (!out.reached && (field.cell_center(cell) - goal).norm() <= field.goal_radius)
    out.reached = true;
  return out;
}

/// All-pairs shortest-path distances between free cells (BFS, in world units).
/// Blocked query points snap to the nearest free cell so the induced metric is
/// total on the whole box.
inline ContextMetric grid_path_distance_metric(const GoalField& field) {
  const int n = field.n_cells();
  const int nx = field.nx();
  auto dist = std::make_shared<std::vector<std::vector<int>>>();
  dist->assign(n, {});
  for (int s = 0; s < n; ++s) {
    if (field.blocked_cell(s)) continue;
    auto& d = (*dist)[s];
    d.assign(n, -1);
    std::deque<int> q{s};
    d[s] = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      int ix = u % nx, iy = u / nx;
      const int dx[] = {0, 0, -1, 1}, dy[] = {1, -1, 0, 0};
      for (int k = 0; k < 4; ++k) {
        int jx = ix + dx[k], jy = iy + dy[k];
        if (jx < 0 || jx >= nx || jy < 0 || jy >= field.ny()) continue;
        int v = jy * nx + jx;
        if (field.blocked_cell(v) || d[v] >= 0) continue;
        d[v] = d[u] + 1;
        q.push_back(v);
      }
    }
  }
  auto snap = [field](const Eigen::Vector2d& p) {
    int c = field.cell_of(p);
    if (!field.blocked_cell(c)) return c;
    double best = std::numeric_limits<double>::infinity();
    int best_cell = -1;
    for (int s = 0; s < field.n_cells(); ++s) {
      if (field.blocked_cell(s)) continue;
      double d = (field.cell_center(s) - p).norm();
      if (d < best) {
        best = d;
        best_cell = s;
      }
    }
    return best_cell;
  };
  double cs = field.cell_size;
  return [field, dist, snap, cs](const Eigen::Ref<const Vector>& a,
                                 const Eigen::Ref<const Vector>& b) {
    int ca = snap({a[0], a[1]});
    int cb = snap({b[0], b[1]});
    int d = (*dist)[ca][cb];
    if (d < 0) throw std::runtime_error("grid_path_distance_metric: disconnected free space");
    return cs * double(d);
  };
}

}  // namespace gradient
