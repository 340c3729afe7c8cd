#pragma once

#include <algorithm>
#include <array>
#include <utility>

#include "gradient/cmdp.hpp"
#include "gradient/cost_matrix.hpp"

namespace gradient {

struct DenseLayer {
  Matrix W;
  Vector b;
};

/// Encoder/decoder parameter set: dense layers with tanh on hidden layers and
/// a linear final layer on each side.
struct MLPParams {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  int in_dim() const { return static_cast<int>(encoder.front().W.cols()); }
  int latent_dim() const { return static_cast<int>(encoder.back().W.rows()); }

  void validate() const {
    if (encoder.empty() || decoder.empty()) throw std::runtime_error("MLPParams: empty nets");
    for (const auto* net : {&encoder, &decoder})
      for (const DenseLayer& l : *net)
        if (!l.W.allFinite() || !l.b.allFinite())
          throw std::runtime_error("MLPParams: non-finite parameters");
    if (decoder.front().W.cols() != latent_dim() || decoder.back().W.rows() != in_dim())
      throw std::runtime_error("MLPParams: encoder/decoder shapes incompatible");
  }

  static MLPParams init(int in_dim, int latent_dim, int hidden, Rng& rng) {
    auto layer = [&rng](int rows, int cols) {
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      DenseLayer l;
      l.W.resize(rows, cols);
      double scale = 1.0 / std::sqrt(double(cols));
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) l.W(i, j) = u(rng) * scale;
      l.b = Vector::Zero(rows);
      return l;
    };
    MLPParams p;
    p.encoder = {layer(hidden, in_dim), layer(hidden, hidden), layer(latent_dim, hidden)};
    p.decoder = {layer(hidden, latent_dim), layer(hidden, hidden), layer(in_dim, hidden)};
    return p;
  }

  /// Parameter-wise zero clone, used as a gradient accumulator.
  static MLPParams zeros_like(const MLPParams& p) {
    MLPParams g = p;
    for (auto* net : {&g.encoder, &g.decoder})
      for (DenseLayer& l : *net) {
        l.W.setZero();
        l.b.setZero();
      }
    return g;
  }
};

struct EmbedTrainConfig {
  double lambda = 0.1;       // reconstruction weight
  double learning_rate = 1e-2;
  int epochs = 200;
  int batch_size = 32;
  int n_pairs = 512;
  int hidden = 32;
  int latent_dim = 2;
  unsigned long seed = 0;

  void validate() const {
    if (lambda < 0.0) throw std::invalid_argument("EmbedTrainConfig: lambda >= 0 required");
    if (learning_rate <= 0.0 || epochs < 0 || batch_size < 1 || n_pairs < 1 || hidden < 1 ||
        latent_dim < 1)
      throw std::invalid_argument("EmbedTrainConfig: positive budgets required");
  }
};

namespace detail {

/// Forward pass caching post-activation outputs (acts[0] is the input).
inline Vector mlp_forward(const std::vector<DenseLayer>& net, const Vector& x,
                          std::vector<Vector>* acts = nullptr) {
  if (x.size() != net.front().W.cols())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  Vector a = x;
  if (acts) {
    acts->clear();
    acts->push_back(a);
  }
  for (size_t l = 0; l < net.size(); ++l) {
    Vector pre = net[l].W * a + net[l].b;
    a = (l + 1 < net.size()) ? pre.array().tanh().matrix() : pre;
    if (!a.allFinite()) throw std::runtime_error("mlp_forward: non-finite activation");
    if (acts) acts->push_back(a);
  }
  return a;
}

/// Backward pass: accumulates parameter gradients into grads and returns the
/// gradient with respect to the network input.
inline Vector mlp_backward(const std::vector<DenseLayer>& net, const std::vector<Vector>& acts,
                           Vector grad_out, std::vector<DenseLayer>& grads) {
  for (int l = static_cast<int>(net.size()) - 1; l >= 0; --l) {
    Vector grad_pre = grad_out;
    if (l + 1 < static_cast<int>(net.size()))
      grad_pre = grad_out.cwiseProduct((1.0 - acts[l + 1].array().square()).matrix());
    grads[l].W += grad_pre * acts[l].transpose();
    grads[l].b += grad_pre;
    grad_out = net[l].W.transpose() * grad_pre;
  }
  return grad_out;
}

}  // namespace detail

inline Vector encode_point(const MLPParams& p, const Vector& c) {
  return detail::mlp_forward(p.encoder, c);
}
inline Vector decode_point(const MLPParams& p, const Vector& z) {
  return detail::mlp_forward(p.decoder, z);
}

/// Pointwise encoder application preserving weights.
inline Particles encode(const MLPParams& p, const Particles& cloud) {
  Particles out;
  out.points.resize(cloud.size(), p.latent_dim());
  for (int i = 0; i < cloud.size(); ++i)
    out.points.row(i) = encode_point(p, cloud.points.row(i).transpose()).transpose();
  out.weights = cloud.weights;
  return out;
}

/// Pointwise decoder application preserving weights.
inline Particles decode(const MLPParams& p, const Particles& latent) {
  Particles out;
  out.points.resize(latent.size(), p.in_dim());
  for (int i = 0; i < latent.size(); ++i)
    out.points.row(i) = decode_point(p, latent.points.row(i).transpose()).transpose();
  out.weights = latent.weights;
  return out;
}

/// Distance-embedding objective: for each pair, the squared latent norm gap
/// against the target distance, plus lambda times the reconstruction error of
/// both endpoints:
///   sum_i (||e(c1)-e(c2)||^2 - d_i)^2 + lambda * sum_i sum_k ||dec(enc(ck)) - ck||^2.
inline double embed_loss(const MLPParams& p, const Matrix& c1, const Matrix& c2,
                         const Vector& d, double lambda) {
  if (c1.rows() != c2.rows() || c1.rows() != d.size())
    throw std::invalid_argument("embed_loss: misaligned batch");
  if (lambda < 0.0 || (d.array() < 0.0).any())
    throw std::invalid_argument("embed_loss: nonnegative lambda and distances required");
  double loss = 0.0;
  for (int i = 0; i < c1.rows(); ++i) {
    Vector z1 = encode_point(p, c1.row(i).transpose());
    Vector z2 = encode_point(p, c2.row(i).transpose());
    double gap = (z1 - z2).squaredNorm() - d[i];
    loss += gap * gap;
    if (lambda > 0.0) {
      loss += lambda * (decode_point(p, z1) - c1.row(i).transpose()).squaredNorm();
      loss += lambda * (decode_point(p, z2) - c2.row(i).transpose()).squaredNorm();
    }
  }
  return loss;
}

/// Exact analytic gradient of embed_loss, same shape as the parameters.
inline MLPParams embed_grad(const MLPParams& p, const Matrix& c1, const Matrix& c2,
                            const Vector& d, double lambda) {
  if (c1.rows() != c2.rows() || c1.rows() != d.size())
    throw std::invalid_argument("embed_grad: misaligned batch");
  MLPParams g = MLPParams::zeros_like(p);
  for (int i = 0; i < c1.rows(); ++i) {
    std::vector<Vector> acts1, acts2;
    Vector z1 = detail::mlp_forward(p.encoder, c1.row(i).transpose(), &acts1);
    Vector z2 = detail::mlp_forward(p.encoder, c2.row(i).transpose(), &acts2);
    Vector e = z1 - z2;
    double gap = e.squaredNorm() - d[i];
    // d/dz1 (gap^2) = 4 * gap * (z1 - z2); antisymmetric for z2.
    Vector gz1 = 4.0 * gap * e;
    Vector gz2 = -gz1;
    if (lambda > 0.0) {
      std::vector<Vector> dacts1, dacts2;
      Vector y1 = detail::mlp_forward(p.decoder, z1, &dacts1);
      Vector y2 = detail::mlp_forward(p.decoder, z2, &dacts2);
      gz1 += detail::mlp_backward(p.decoder, dacts1,
                                  2.0 * lambda * (y1 - c1.row(i).transpose()), g.decoder);
      gz2 += detail::mlp_backward(p.decoder, dacts2,
                                  2.0 * lambda * (y2 - c2.row(i).transpose()), g.decoder);
    }
    detail::mlp_backward(p.encoder, acts1, gz1, g.encoder);
    detail::mlp_backward(p.encoder, acts2, gz2, g.encoder);
  }
  return g;
}

struct EmbedTrainReport {
  MLPParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // (epoch, total loss, distance term, reconstruction term)
  std::vector<std::array<double, 4>> curve;
};

/// Mini-batch gradient descent on embed_loss over uniformly sampled context
/// pairs from the pool; deterministic for a fixed config seed.
inline EmbedTrainReport train_embedding(const Matrix& context_pool, const ContextMetric& metric,
                                        const EmbedTrainConfig& cfg) {
  cfg.validate();
  if (context_pool.rows() < 2)
    throw std::invalid_argument("train_embedding: need at least two contexts");
  Rng rng(cfg.seed);
  const int dim = static_cast<int>(context_pool.cols());

  Matrix c1(cfg.n_pairs, dim), c2(cfg.n_pairs, dim);
  Vector d(cfg.n_pairs);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(context_pool.rows()) - 1);
  for (int i = 0; i < cfg.n_pairs; ++i) {
    c1.row(i) = context_pool.row(pick(rng));
    c2.row(i) = context_pool.row(pick(rng));
    d[i] = metric(c1.row(i), c2.row(i));
    if (!std::isfinite(d[i]) || d[i] < 0.0)
      throw std::invalid_argument("train_embedding: metric must be finite and nonnegative");
  }

  EmbedTrainReport report;
  report.params = MLPParams::init(dim, cfg.latent_dim, cfg.hidden, rng);
  report.initial_loss = embed_loss(report.params, c1, c2, d, cfg.lambda);
  report.final_loss = report.initial_loss;

  std::vector<int> order(cfg.n_pairs);
  for (int i = 0; i < cfg.n_pairs; ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < cfg.n_pairs; start += cfg.batch_size) {
      int m = std::min(cfg.batch_size, cfg.n_pairs - start);
      Matrix b1(m, dim), b2(m, dim);
      Vector bd(m);
      for (int i = 0; i < m; ++i) {
        b1.row(i) = c1.row(order[start + i]);
        b2.row(i) = c2.row(order[start + i]);
        bd[i] = d[order[start + i]];
      }
      MLPParams g = embed_grad(report.params, b1, b2, bd, cfg.lambda);
      double scale = cfg.learning_rate / m;
      for (auto nets : {std::pair{&report.params.encoder, &g.encoder},
                        std::pair{&report.params.decoder, &g.decoder}})
        for (size_t l = 0; l < nets.first->size(); ++l) {
          (*nets.first)[l].W -= scale * (*nets.second)[l].W;
          (*nets.first)[l].b -= scale * (*nets.second)[l].b;
        }
    }
    double dist_term = embed_loss(report.params, c1, c2, d, 0.0);
    double total = embed_loss(report.params, c1, c2, d, cfg.lambda);
    if (!std::isfinite(total))
      throw std::runtime_error("train_embedding: diverged at epoch " + std::to_string(epoch));
    report.final_loss = total;
    report.curve.push_back(
        {double(epoch), total, dist_term, cfg.lambda > 0.0 ? (total - dist_term) / cfg.lambda
                                                           : 0.0});
  }
  report.params.validate();
  return report;
}

}  // namespace gradient
