#include "rfs/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfs {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec normalize(Vec v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("degenerate embedding");
  }
  for (double& x : v) x /= norm;
  return v;
}

void ClassMatrix::set_row(std::size_t i, std::span<const double> v) {
  std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * d));
}

SoftmaxState softmax_state_from_logits(Vec logits, std::size_t target, double tau) {
  if (logits.size() < 2) throw std::invalid_argument("need at least two classes");
  if (target >= logits.size()) throw std::out_of_range("target class out of range");
  SoftmaxState state;
  state.tau = tau;
  state.target = target;
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double shifted_sum = 0.0;
  for (double o : logits) shifted_sum += std::exp(o - max_logit);
  state.log_partition = max_logit + std::log(shifted_sum);
  state.partition = std::exp(state.log_partition);
  state.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    state.probs[i] = std::exp(logits[i] - state.log_partition);
  }
  state.logits = std::move(logits);
  return state;
}

SoftmaxState compute_softmax_state(const Vec& h, const ClassMatrix& classes, double tau,
                                   std::size_t target) {
  if (target >= classes.n) throw std::out_of_range("target class out of range");
  Vec logits(classes.n);
  for (std::size_t i = 0; i < classes.n; ++i) logits[i] = tau * dot(h, classes.row(i));
  return softmax_state_from_logits(std::move(logits), target, tau);
}

double full_loss(const SoftmaxState& state) {
  return -state.logits[state.target] + state.log_partition;
}

Vec full_gradient(const SoftmaxState& state, const LogitGradTable& grads) {
  if (grads.n != state.num_classes()) throw std::invalid_argument("gradient table size mismatch");
  Vec out(grads.dim, 0.0);
  for (std::size_t i = 0; i < grads.n; ++i) {
    const double w = state.probs[i];
    auto gi = grads.row(i);
    for (std::size_t k = 0; k < grads.dim; ++k) out[k] += w * gi[k];
  }
  auto gt = grads.row(state.target);
  for (std::size_t k = 0; k < grads.dim; ++k) out[k] -= gt[k];
  return out;
}

LogitGradTable linear_logit_grads(const Vec& h, const ClassMatrix& classes, double tau) {
  const std::size_t d = classes.d;
  LogitGradTable table(classes.n, d + classes.n * d);
  for (std::size_t i = 0; i < classes.n; ++i) {
    auto row = table.row(i);
    auto ci = classes.row(i);
    for (std::size_t k = 0; k < d; ++k) row[k] = tau * ci[k];
    for (std::size_t k = 0; k < d; ++k) row[d + i * d + k] = tau * h[k];
  }
  return table;
}

}  // namespace rfs
