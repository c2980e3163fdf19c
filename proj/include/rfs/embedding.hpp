#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rfs {

using Vec = std::vector<double>;

/// Scales v to unit l2 norm. Throws std::invalid_argument("degenerate
/// embedding") on a zero vector.
Vec normalize(Vec v);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Row-major n x d matrix of class embeddings.
struct ClassMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;  // n * d

  ClassMatrix() = default;
  ClassMatrix(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
  void set_row(std::size_t i, std::span<const double> v);
};

/// Exact softmax quantities for one (input, target) instance.
/// logits[i] = tau * h.c_i, probs[i] = exp(logits[i]) / partition.
struct SoftmaxState {
  double tau = 1.0;
  std::size_t target = 0;
  Vec logits;
  Vec probs;
  double partition = 0.0;      // sum_i exp(o_i), rescaled after max-shift
  double log_partition = 0.0;  // stable log of the partition

  std::size_t num_classes() const { return logits.size(); }
};

/// Builds a state directly from logits (max-shifted log-sum-exp inside).
SoftmaxState softmax_state_from_logits(Vec logits, std::size_t target, double tau = 1.0);

SoftmaxState compute_softmax_state(const Vec& h, const ClassMatrix& classes, double tau,
                                   std::size_t target);

/// Full softmax cross-entropy loss, -o_t + log Z.
double full_loss(const SoftmaxState& state);

/// Per-class logit gradients: row i holds the gradient of o_i with respect
/// to a flat parameter vector of length dim.
struct LogitGradTable {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // n * dim

  LogitGradTable() = default;
  LogitGradTable(std::size_t n_, std::size_t dim_) : n(n_), dim(dim_), data(n_ * dim_, 0.0) {}
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

/// Gradient of the full loss: -grad(o_t) + sum_i p_i grad(o_i).
Vec full_gradient(const SoftmaxState& state, const LogitGradTable& grads);

/// Logit gradients of the linear model o_i = tau * h.c_i over the flat
/// parameter layout [h | c_1 | ... | c_n].
LogitGradTable linear_logit_grads(const Vec& h, const ClassMatrix& classes, double tau);

}  // namespace rfs
