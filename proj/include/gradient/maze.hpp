#pragma once

#include <deque>
#include <fstream>
#include <sstream>
#include <string>

#include "gradient/cmdp.hpp"

namespace gradient {

enum class Cell : char { Free = '.', Wall = '#', Goal = 'G' };

/// Rectangular grid maze with exactly one goal cell.
struct MazeLayout {
  int height = 0, width = 0;
  std::vector<Cell> cells;              // row-major
  bool goal_is_start_context = false;   // whether the goal cell is a legal start

  Cell at(int r, int c) const { return cells[r * width + c]; }

  int goal_row = -1, goal_col = -1;

  static MazeLayout parse(const std::string& text, bool goal_is_start = false) {
    MazeLayout m;
    m.goal_is_start_context = goal_is_start;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (m.width == 0)
        m.width = static_cast<int>(line.size());
      else if (static_cast<int>(line.size()) != m.width)
        throw std::invalid_argument("MazeLayout: ragged rows in layout");
      for (char ch : line) {
        switch (ch) {
          case '.': m.cells.push_back(Cell::Free); break;
          case '#': m.cells.push_back(Cell::Wall); break;
          case 'G': m.cells.push_back(Cell::Goal); break;
          default:
            throw std::invalid_argument(std::string("MazeLayout: unknown cell '") + ch + "'");
        }
      }
      ++m.height;
    }
    if (m.height == 0) throw std::invalid_argument("MazeLayout: empty layout");
    int goals = 0;
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c)
        if (m.at(r, c) == Cell::Goal) {
          ++goals;
          m.goal_row = r;
          m.goal_col = c;
        }
    if (goals != 1) throw std::invalid_argument("MazeLayout: exactly one goal required");
    m.check_reachability();
    return m;
  }

  static MazeLayout load(const std::string& path, bool goal_is_start = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("MazeLayout: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), goal_is_start);
  }

  void check_reachability() const {
    // flood fill from the goal over non-wall cells
    std::vector<char> seen(cells.size(), 0);
    std::deque<std::pair<int, int>> q{{goal_row, goal_col}};
    seen[goal_row * width + goal_col] = 1;
    while (!q.empty()) {
      auto [r, c] = q.front();
      q.pop_front();
      const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int nr = r + dr[k], nc = c + dc[k];
        if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
        if (at(nr, nc) == Cell::Wall || seen[nr * width + nc]) continue;
        seen[nr * width + nc] = 1;
        q.emplace_back(nr, nc);
      }
    }
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (at(r, c) == Cell::Free && !seen[r * width + c])
          throw std::invalid_argument("MazeLayout: free cell unreachable from the goal");
  }
};

/// Maze as a tabular CMDP: states are the non-wall cells, contexts are the
/// legal start cells, actions are {north, south, west, east}. Moving into a
/// wall keeps position; the goal is absorbing. The reward is goal_reward on
/// any transition into or within the goal and step_reward otherwise.
struct MazeCMDP {
  TabularCMDP cmdp;
  MazeLayout layout;
  std::vector<int> state_cell;   // state -> flat cell index
  std::vector<int> cell_state;   // flat cell index -> state or -1
  int goal_state = -1;

  Matrix context_positions() const {  // (row, col) per context
    Matrix p(cmdp.n_contexts, 2);
    for (int c = 0; c < cmdp.n_contexts; ++c) {
      int cell = state_cell[cmdp.context_state[c]];
      p(c, 0) = cell / layout.width;
      p(c, 1) = cell % layout.width;
    }
    return p;
  }
};

inline MazeCMDP maze_from_layout(const MazeLayout& layout, double gamma, double step_reward = -1.0,
                                 double goal_reward = 0.0) {
  MazeCMDP m;
  m.layout = layout;
  m.cell_state.assign(layout.cells.size(), -1);
  for (int r = 0; r < layout.height; ++r)
    for (int c = 0; c < layout.width; ++c)
      if (layout.at(r, c) != Cell::Wall) {
        m.cell_state[r * layout.width + c] = static_cast<int>(m.state_cell.size());
        m.state_cell.push_back(r * layout.width + c);
      }

  TabularCMDP& e = m.cmdp;
  e.n_states = static_cast<int>(m.state_cell.size());
  e.n_actions = 4;  // north, south, west, east
  e.gamma = gamma;
  e.assumption1 = true;
  e.reward_min = std::min(step_reward, goal_reward);
  e.reward_max = std::max(step_reward, goal_reward);
  e.terminal.assign(e.n_states, 0);
  m.goal_state = m.cell_state[layout.goal_row * layout.width + layout.goal_col];
  e.terminal[m.goal_state] = 1;

  e.transition.assign(4, Matrix::Zero(e.n_states, e.n_states));
  e.reward = Matrix::Zero(e.n_states, 4);
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  for (int s = 0; s < e.n_states; ++s) {
    int r = m.state_cell[s] / layout.width, c = m.state_cell[s] % layout.width;
    for (int a = 0; a < 4; ++a) {
      int nr = r + dr[a], nc = c + dc[a];
      int ns = s;
      if (s != m.goal_state && nr >= 0 && nr < layout.height && nc >= 0 && nc < layout.width &&
          layout.at(nr, nc) != Cell::Wall)
        ns = m.cell_state[nr * layout.width + nc];
      if (s == m.goal_state) ns = s;  // absorbing
      e.transition[a](s, ns) = 1.0;
      e.reward(s, a) = (ns == m.goal_state) ? goal_reward : step_reward;
    }
  }

  for (int s = 0; s < e.n_states; ++s)
    if (s != m.goal_state || layout.goal_is_start_context) e.context_state.push_back(s);
  e.n_contexts = static_cast<int>(e.context_state.size());
  e.validate();
  return m;
}

/// Breadth-first shortest-path length (in moves) from every state to the goal.
inline std::vector<int> maze_goal_distances(const MazeCMDP& m) {
  std::vector<int> dist(m.cmdp.n_states, -1);
  std::deque<int> q{m.goal_state};
  dist[m.goal_state] = 0;
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    int r = m.state_cell[s] / m.layout.width, c = m.state_cell[s] % m.layout.width;
    const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= m.layout.height || nc < 0 || nc >= m.layout.width) continue;
      if (m.layout.at(nr, nc) == Cell::Wall) continue;
      int t = m.cell_state[nr * m.layout.width + nc];
      if (dist[t] < 0) {
        dist[t] = dist[s] + 1;
        q.push_back(t);
      }
    }
  }
  return dist;
}

}  // namespace gradient
