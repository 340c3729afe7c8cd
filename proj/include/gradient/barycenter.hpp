#pragma once

#include <cmath>
#include <stdexcept>

#include "gradient/exact_lp.hpp"
#include "gradient/sinkhorn.hpp"

namespace gradient {

inline constexpr double kMassFloor = 1e-9;

namespace detail {

// log(M^T exp(x)) with M given in log space, guarded against all -inf slices.
inline Vector log_matvec(const Matrix& logK, const Vector& logx) {
  const int n = static_cast<int>(logK.rows());
  const int m = static_cast<int>(logK.cols());
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    double c = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) c = std::max(c, logK(i, j) + logx[j]);
    if (!std::isfinite(c)) {
      out[i] = c;
      continue;
    }
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += std::exp(logK(i, j) + logx[j] - c);
    out[i] = c + std::log(s);
  }
  return out;
}

}  // namespace detail

struct BarycenterResult {
  Categorical rho;
  bool converged = true;
  int iterations = 0;
};

/// Debiased fixed-support barycenter of mu and nu on a shared support.
/// Weight (1 - alpha) attaches to mu and alpha to nu, so alpha = 0 returns mu.
/// The scaling iteration runs entirely in log space.
inline BarycenterResult barycenter_fixed_support(const Categorical& mu, const Categorical& nu,
                                                 double alpha, const CostMatrix& C,
                                                 const SinkhornConfig& cfg) {
  cfg.validate();
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("barycenter_fixed_support: alpha outside [0,1]");
  const int n = mu.size();
  if (nu.size() != n || C.rows() != n || C.cols() != n)
    throw std::invalid_argument("barycenter_fixed_support: shared-support dimension mismatch");

  const double w1 = 1.0 - alpha;
  const double w2 = alpha;
  const double eps = cfg.resolve_epsilon(C.max_entry());
  const Matrix logK = -C.entries / eps;
  const Matrix logKt = logK.transpose();

  auto safe_log = [](const Vector& v) {
    return Vector(v.array().max(0.0).log());  // log(0) = -inf is intended
  };
  const Vector log_mu = safe_log(mu.weights);
  const Vector log_nu = safe_log(nu.weights);

  Vector log_b1 = Vector::Zero(n), log_b2 = Vector::Zero(n), log_l = Vector::Zero(n);
  Vector log_rho = Vector::Constant(n, -std::log(double(n)));
  Vector rho_prev = log_rho.array().exp();

  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iter; ++it) {
    Vector log_a1 = log_mu - detail::log_matvec(logK, log_b1);
    Vector log_a2 = log_nu - detail::log_matvec(logK, log_b2);
    Vector kta1 = detail::log_matvec(logKt, log_a1);
    Vector kta2 = detail::log_matvec(logKt, log_a2);
    log_rho = w1 * kta1 + w2 * kta2;
    if (cfg.debiased) log_rho += log_l;
    log_b1 = log_rho - kta1;
    log_b2 = log_rho - kta2;
    if (cfg.debiased)
      log_l = 0.5 * (log_l + log_rho - detail::log_matvec(logK, log_l));

    Vector rho = log_rho.array().exp();
    rho /= rho.sum();
    double delta = (rho - rho_prev).cwiseAbs().maxCoeff();
    rho_prev = rho;
    if (delta <= cfg.tol) {
      converged = true;
      ++it;
      break;
    }
  }

  Vector rho = log_rho.array().exp();
  double s = rho.sum();
  if (!(s > 0.0) || !rho.allFinite())
    throw std::runtime_error("barycenter_fixed_support: iteration produced a degenerate weight");
  rho /= s;
  return BarycenterResult{Categorical(std::move(rho)), converged, it};
}

/// McCann displacement interpolation between two particle clouds: one output
/// particle at (1-alpha) c_si + alpha c_tj per transport-plan entry above the
/// mass floor.
inline Particles barycenter_free_support(const Particles& src, const Particles& tgt, double alpha,
                                         const ContextMetric& metric) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("barycenter_free_support: alpha outside [0,1]");
  if (src.dim() != tgt.dim())
    throw std::invalid_argument("barycenter_free_support: dimension mismatch");

  CostMatrix C = build_cost_matrix(src, tgt, metric);
  Categorical mu(src.weights), nu(tgt.weights);
  Coupling plan;
  if (static_cast<long>(src.size()) * tgt.size() <= kLpOracleCap) {
    plan = exact_ot_lp(mu, nu, C);
  } else {
    plan = sinkhorn_plan_annealed(mu, nu, C, SinkhornConfig{});
  }

  std::vector<int> is, js;
  for (int i = 0; i < src.size(); ++i)
    for (int j = 0; j < tgt.size(); ++j)
      if (plan.plan(i, j) > kMassFloor) {
        is.push_back(i);
        js.push_back(j);
      }
  if (is.empty())
    throw std::runtime_error("barycenter_free_support: empty plan after mass floor");

  Matrix pts(is.size(), src.dim());
  Vector w(is.size());
  for (size_t k = 0; k < is.size(); ++k) {
    pts.row(k) = (1.0 - alpha) * src.points.row(is[k]) + alpha * tgt.points.row(js[k]);
    w[k] = plan.plan(is[k], js[k]);
  }
  w /= w.sum();
  return Particles(std::move(pts), std::move(w));
}

}  // namespace gradient
