#pragma once

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "gradient/cost_matrix.hpp"
#include "gradient/coupling.hpp"

namespace gradient {

inline constexpr long kLpOracleCap = 10'000;  // max n_s * n_t

/// Exact unregularized optimal transport between two categorical marginals,
/// solved as a min-cost flow on the dense bipartite graph with successive
/// shortest paths and Johnson potentials. Serves as the oracle for the
/// entropic solvers.
inline Coupling exact_ot_lp(const Categorical& mu, const Categorical& nu, const CostMatrix& C) {
  const int ns = mu.size();
  const int nt = nu.size();
  if (ns != C.rows() || nt != C.cols())
    throw std::invalid_argument("exact_ot_lp: marginal/cost dimension mismatch");
  if (static_cast<long>(ns) * nt > kLpOracleCap)
    throw std::invalid_argument("exact_ot_lp: instance above oracle size cap");

  const double inf = std::numeric_limits<double>::infinity();
  const double mass_eps = 1e-15;

  Matrix plan = Matrix::Zero(ns, nt);
  Vector supply = mu.weights;
  Vector demand = nu.weights;
  // Node indexing: sources [0, ns), sinks [ns, ns + nt).
  std::vector<double> potential(ns + nt, 0.0);

  std::vector<double> dist(ns + nt);
  std::vector<int> parent(ns + nt);
  std::vector<char> done(ns + nt);

  while (true) {
    if ((supply.array() <= mass_eps).all()) break;

    // Multi-source Dijkstra on reduced costs over the residual graph.
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    for (int i = 0; i < ns; ++i) {
      if (supply[i] > mass_eps) {
        dist[i] = 0.0;
        pq.emplace(0.0, i);
      }
    }
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u < ns) {
        for (int j = 0; j < nt; ++j) {
          double rc = C.entries(u, j) + potential[u] - potential[ns + j];
          if (rc < 0.0) rc = 0.0;  // guards tiny negative float residue
          double nd = d + rc;
          if (nd < dist[ns + j]) {
            dist[ns + j] = nd;
            parent[ns + j] = u;
            pq.emplace(nd, ns + j);
          }
        }
      } else {
        int j = u - ns;
        for (int i = 0; i < ns; ++i) {
          if (plan(i, j) <= mass_eps) continue;
          double rc = -C.entries(i, j) + potential[u] - potential[i];
          if (rc < 0.0) rc = 0.0;
          double nd = d + rc;
          if (nd < dist[i]) {
            dist[i] = nd;
            parent[i] = u;
            pq.emplace(nd, i);
          }
        }
      }
    }

    // Closest sink with remaining demand.
    int best = -1;
    double best_d = inf;
    for (int j = 0; j < nt; ++j) {
      if (demand[j] > mass_eps && dist[ns + j] < best_d) {
        best_d = dist[ns + j];
        best = ns + j;
      }
    }
    if (best < 0)
      throw std::runtime_error("exact_ot_lp: infeasible instance (unbalanced marginals)");

    for (int v = 0; v < ns + nt; ++v)
      if (dist[v] < inf) potential[v] += dist[v];

    // Bottleneck along the augmenting path.
    double f = demand[best - ns];
    for (int v = best; parent[v] >= 0; v = parent[v]) {
      int p = parent[v];
      if (v >= ns) {
        // forward arc p -> v, capacity limited only by origin supply
        if (parent[p] < 0) f = std::min(f, supply[p]);
      } else {
        f = std::min(f, plan(v, p - ns));  // backward arc
      }
    }
    for (int v = best; parent[v] >= 0; v = parent[v]) {
      int p = parent[v];
      if (v >= ns)
        plan(p, v - ns) += f;
      else
        plan(v, p - ns) -= f;
    }
    int origin = best;
    while (parent[origin] >= 0) origin = parent[origin];
    supply[origin] -= f;
    demand[best - ns] -= f;
  }

  double cost = (plan.array() * C.entries.array()).sum();
  return Coupling{std::move(plan), cost, true, 0, 0.0};
}

}  // namespace gradient
