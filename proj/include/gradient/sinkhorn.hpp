#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gradient/cost_matrix.hpp"
#include "gradient/coupling.hpp"

namespace gradient {

struct SinkhornConfig {
  double epsilon = 0.0;    // entropic regularizer; 0 means auto (1e-3 * max cost)
  double tol = 1e-9;       // max marginal violation at the fixed point
  int max_iter = 10'000;
  bool debiased = false;

  void validate() const {
    if (epsilon < 0.0 || tol <= 0.0 || max_iter < 1)
      throw std::invalid_argument("SinkhornConfig: epsilon >= 0, tol > 0, max_iter >= 1 required");
  }

  double resolve_epsilon(double max_cost) const {
    if (epsilon > 0.0) return epsilon;
    return std::max(1e-3 * max_cost, 1e-12);
  }
};

namespace detail {

// Scaling-vector range outside of which the plain iteration hands over to the
// log-domain path.
inline constexpr double kScaleLo = 1e-100;
inline constexpr double kScaleHi = 1e+100;

inline Vector logsumexp_rows(const Matrix& m) {
  Vector c = m.rowwise().maxCoeff();
  return c.array() + ((m.colwise() - c).array().exp().rowwise().sum()).log();
}

struct ActiveSupport {
  std::vector<int> rows, cols;
  Vector mu, nu;   // restricted, still summing to 1
  Matrix cost;
};

// Zero-mass bins are dropped before iteration and reinserted as exact zeros;
// the elementwise divisions are undefined on zero mass.
inline ActiveSupport restrict_support(const Categorical& mu, const Categorical& nu,
                                      const CostMatrix& C) {
  ActiveSupport a;
  for (int i = 0; i < mu.size(); ++i)
    if (mu.weights[i] > 0.0) a.rows.push_back(i);
  for (int j = 0; j < nu.size(); ++j)
    if (nu.weights[j] > 0.0) a.cols.push_back(j);
  if (a.rows.empty() || a.cols.empty())
    throw std::invalid_argument("sinkhorn: all-zero marginal");
  a.mu.resize(a.rows.size());
  a.nu.resize(a.cols.size());
  a.cost.resize(a.rows.size(), a.cols.size());
  for (size_t i = 0; i < a.rows.size(); ++i) a.mu[i] = mu.weights[a.rows[i]];
  for (size_t j = 0; j < a.cols.size(); ++j) a.nu[j] = nu.weights[a.cols[j]];
  for (size_t i = 0; i < a.rows.size(); ++i)
    for (size_t j = 0; j < a.cols.size(); ++j)
      a.cost(i, j) = C.entries(a.rows[i], a.cols[j]);
  return a;
}

inline bool in_scale_range(const Vector& x) {
  return x.allFinite() && x.minCoeff() >= kScaleLo && x.maxCoeff() <= kScaleHi;
}

// One Sinkhorn solve on an active (strictly positive) support. Potentials f, g
// are in cost units and can be warm-started; used both directly and inside the
// annealing loop. Runs the plain scaling iteration while the scaling vectors
// stay in range, otherwise continues with log-domain updates.
inline void sinkhorn_potentials(const Vector& mu, const Vector& nu, const Matrix& C,
                                double epsilon, double tol, int max_iter, Vector& f, Vector& g,
                                int& iters_out, double& err_out) {
  const int ns = static_cast<int>(mu.size());
  const int nt = static_cast<int>(nu.size());
  const Vector log_mu = mu.array().log();
  const Vector log_nu = nu.array().log();

  bool log_domain = C.maxCoeff() / epsilon > 500.0;  // Gibbs kernel would underflow
  Vector u, v;
  Matrix K;
  if (!log_domain) {
    u = (f.array() / epsilon).exp();
    v = (g.array() / epsilon).exp();
    if (!in_scale_range(u) || !in_scale_range(v)) {
      log_domain = true;
    } else {
      K = (-C / epsilon).array().exp();
    }
  }

  auto absorb = [&]() {  // move current scalings into the potentials
    f = epsilon * u.array().log();
    g = epsilon * v.array().log();
  };

  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    if (!log_domain) {
      Vector u_prev = u, v_prev = v;
      u = mu.array() / (K * v).array();
      v = nu.array() / (K.transpose() * u).array();
      if (!in_scale_range(u) || !in_scale_range(v)) {
        u = u_prev;
        v = v_prev;
        absorb();
        log_domain = true;
        continue;
      }
      err = (u.array() * (K * v).array() - mu.array()).abs().maxCoeff();
    } else {
      Matrix gc = (g.transpose().replicate(ns, 1) - C) / epsilon;
      f = epsilon * (log_mu - logsumexp_rows(gc));
      Matrix fc = (f.replicate(1, nt) - C).transpose() / epsilon;
      g = epsilon * (log_nu - logsumexp_rows(fc));
      Matrix lp = (f.replicate(1, nt) + g.transpose().replicate(ns, 1) - C) / epsilon;
      err = (lp.array().exp().rowwise().sum() - mu.array()).abs().maxCoeff();
    }
    if (err <= tol) {
      ++it;
      break;
    }
  }
  if (!log_domain) absorb();
  iters_out = it;
  err_out = err;
}

struct PotentialSolve {
  Vector f, g;
  int iterations = 0;
  double error = 0.0;
};

inline Coupling assemble_plan(const Categorical& mu, const Categorical& nu, const CostMatrix& C,
                              const ActiveSupport& a, const PotentialSolve& ps, double epsilon,
                              double tol) {
  const int ns = static_cast<int>(a.rows.size());
  const int nt = static_cast<int>(a.cols.size());
  Matrix lp = (ps.f.replicate(1, nt) + ps.g.transpose().replicate(ns, 1) - a.cost) / epsilon;
  Matrix active_plan = lp.array().exp();
  if (!active_plan.allFinite())
    throw std::runtime_error(
        "sinkhorn: Gibbs kernel underflow; rescale costs or increase epsilon");
  Matrix plan = Matrix::Zero(mu.size(), nu.size());
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) plan(a.rows[i], a.cols[j]) = active_plan(i, j);
  Coupling out;
  out.cost = (plan.array() * C.entries.array()).sum();
  out.plan = std::move(plan);
  out.converged = ps.error <= tol;
  out.iterations = ps.iterations;
  out.marginal_error = ps.error;
  return out;
}

}  // namespace detail

/// Entropic transport plan between mu and nu at fixed epsilon.
inline Coupling sinkhorn_plan(const Categorical& mu, const Categorical& nu, const CostMatrix& C,
                              const SinkhornConfig& cfg) {
  cfg.validate();
  if (mu.size() != C.rows() || nu.size() != C.cols())
    throw std::invalid_argument("sinkhorn_plan: marginal/cost dimension mismatch");

  auto a = detail::restrict_support(mu, nu, C);
  const double eps = cfg.resolve_epsilon(C.max_entry());
  detail::PotentialSolve ps;
  ps.f = Vector::Zero(a.rows.size());
  ps.g = Vector::Zero(a.cols.size());
  detail::sinkhorn_potentials(a.mu, a.nu, a.cost, eps, cfg.tol, cfg.max_iter, ps.f, ps.g,
                              ps.iterations, ps.error);
  return detail::assemble_plan(mu, nu, C, a, ps, eps, cfg.tol);
}

/// Annealed entropic plan: epsilon_k = max(eps_target, max(C) * 0.5^k) with
/// warm-started potentials, recovering near-exact plans for oracle comparison.
inline Coupling sinkhorn_plan_annealed(const Categorical& mu, const Categorical& nu,
                                       const CostMatrix& C, const SinkhornConfig& cfg) {
  cfg.validate();
  if (mu.size() != C.rows() || nu.size() != C.cols())
    throw std::invalid_argument("sinkhorn_plan_annealed: marginal/cost dimension mismatch");

  auto a = detail::restrict_support(mu, nu, C);
  const double eps_target = cfg.resolve_epsilon(C.max_entry());
  detail::PotentialSolve ps;
  ps.f = Vector::Zero(a.rows.size());
  ps.g = Vector::Zero(a.cols.size());

  double eps = std::max(C.max_entry(), eps_target);
  int total_iters = 0;
  while (true) {
    bool last = eps <= eps_target * (1.0 + 1e-12);
    double stage_tol = last ? cfg.tol : std::max(cfg.tol, 1e-6);
    int iters = 0;
    detail::sinkhorn_potentials(a.mu, a.nu, a.cost, eps, stage_tol, cfg.max_iter, ps.f, ps.g,
                                iters, ps.error);
    total_iters += iters;
    if (last) break;
    eps = std::max(eps_target, eps * 0.5);
  }
  ps.iterations = total_iters;
  return detail::assemble_plan(mu, nu, C, a, ps, eps_target, cfg.tol);
}

}  // namespace gradient
