#include "rfs/bias_lab.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfs {

namespace {

constexpr std::size_t kEnumerationBudget = 1000000;

void check_q(const SoftmaxState& state, const Vec& q) {
  if (q.size() != state.num_classes()) throw std::invalid_argument("q size mismatch");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i != state.target && !(q[i] > 0.0)) {
      throw std::invalid_argument("q must be strictly positive on negatives");
    }
  }
}

}  // namespace

Diagnostics eq13_diagnostics(const SoftmaxState& state, const Vec& q) {
  check_q(state, q);
  const std::size_t n = state.num_classes();
  Diagnostics diag;
  diag.partition_gap.assign(n, 0.0);
  double z_t = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = -min_ratio;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == state.target) continue;
    const double ej = std::exp(state.logits[j]);
    z_t += ej;
    diag.sum_sq_ratio += ej * ej / q[j];
    const double ratio = ej / q[j];
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
  }
  diag.max_ratio_gap = max_ratio - min_ratio;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == state.target) continue;
    diag.partition_gap[k] = std::fabs(z_t - std::exp(state.logits[k]) / q[k]);
  }
  return diag;
}

BiasBounds compute_bound_terms(const SoftmaxState& state, const Vec& q,
                               const LogitGradTable& grads, std::size_t m) {
  check_q(state, q);
  if (m < 1) throw std::invalid_argument("need at least one sample");
  const std::size_t n = state.num_classes();
  BiasBounds bounds;

  const Diagnostics diag = eq13_diagnostics(state, q);
  bounds.sum_sq_ratio = diag.sum_sq_ratio;
  bounds.max_ratio_gap = diag.max_ratio_gap;
  bounds.partition_gap = diag.partition_gap;

  for (double v : grads.data) bounds.max_grad_coord = std::max(bounds.max_grad_coord, std::fabs(v));

  bounds.weighted_grad_sum.assign(grads.dim, 0.0);
  double z_t = 0.0;
  double gap_weighted_sum = 0.0;  // sum_k e^{o_k} |Z_t - e^{o_k}/q_k|
  for (std::size_t j = 0; j < n; ++j) {
    if (j == state.target) continue;
    const double ej = std::exp(state.logits[j]);
    z_t += ej;
    auto gj = grads.row(j);
    for (std::size_t k = 0; k < grads.dim; ++k) bounds.weighted_grad_sum[k] += ej * gj[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k == state.target) continue;
    gap_weighted_sum += std::exp(state.logits[k]) * diag.partition_gap[k];
  }
  bounds.partition_negatives = z_t;

  const double z = state.partition;
  const double md = static_cast<double>(m);
  bounds.lb_term = bounds.max_grad_coord * gap_weighted_sum / (md * z * z);
  bounds.ub1 = (diag.sum_sq_ratio - z_t * z_t) / (md * z * z * z);
  bounds.ub2 = diag.max_ratio_gap * z_t / (z * z + diag.sum_sq_ratio);
  return bounds;
}

Vec exact_expected_gradient(const SoftmaxState& state, const Vec& q, const LogitGradTable& grads,
                            std::size_t m, Scheme scheme) {
  check_q(state, q);
  const std::size_t n = state.num_classes();
  const std::size_t num_negatives = n - 1;
  double tuples = 1.0;
  for (std::size_t i = 0; i < m; ++i) tuples *= static_cast<double>(num_negatives);
  if (tuples > static_cast<double>(kEnumerationBudget)) {
    throw std::invalid_argument("enumeration budget exceeded");
  }

  std::vector<std::size_t> negatives;
  negatives.reserve(num_negatives);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != state.target) negatives.push_back(i);
  }

  Vec expected(grads.dim, 0.0);
  std::vector<std::size_t> odometer(m, 0);
  SampledBatch batch;
  batch.target = state.target;
  batch.m = m;
  batch.scheme = scheme;
  while (true) {
    batch.samples.clear();
    batch.q_values.clear();
    double weight = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t s = negatives[odometer[i]];
      batch.samples.push_back(s);
      batch.q_values.push_back(q[s]);
      weight *= q[s];
    }
    const Vec grad = gradient_estimate(adjust_logits(batch, state), grads);
    for (std::size_t k = 0; k < grads.dim; ++k) expected[k] += weight * grad[k];

    std::size_t pos = 0;
    while (pos < m && ++odometer[pos] == num_negatives) odometer[pos++] = 0;
    if (pos == m) break;
  }
  return expected;
}

BiasReport mc_bias_report(const SoftmaxState& state, const Vec& q, const LogitGradTable& grads,
                          std::size_t m, std::size_t trials, std::mt19937_64& rng,
                          Scheme scheme) {
  check_q(state, q);
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  std::discrete_distribution<std::size_t> dist(q.begin(), q.end());

  const std::size_t dim = grads.dim;
  Vec mean(dim, 0.0), comp(dim, 0.0), m2(dim, 0.0);
  SampledBatch batch;
  batch.target = state.target;
  batch.m = m;
  batch.scheme = scheme;
  batch.samples.resize(m);
  batch.q_values.resize(m);
  for (std::size_t t = 1; t <= trials; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t s = dist(rng);
      batch.samples[i] = s;
      batch.q_values[i] = q[s];
    }
    const Vec grad = gradient_estimate(adjust_logits(batch, state), grads);
    const double td = static_cast<double>(t);
    for (std::size_t k = 0; k < dim; ++k) {
      // Welford update with Kahan compensation on the mean.
      const double delta = grad[k] - (mean[k] + comp[k]);
      const double increment = delta / td;
      const double y = increment - comp[k];
      const double new_mean = mean[k] + y;
      comp[k] = (new_mean - mean[k]) - y;
      mean[k] = new_mean;
      m2[k] += delta * (grad[k] - (mean[k] + comp[k]));
    }
  }

  const Vec exact = full_gradient(state, grads);
  BiasReport report;
  report.trials = trials;
  report.bias.resize(dim);
  report.std_errors.resize(dim);
  double bias_sq = 0.0, se_sq = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    report.bias[k] = mean[k] + comp[k] - exact[k];
    const double var = trials > 1 ? m2[k] / static_cast<double>(trials - 1) : 0.0;
    report.std_errors[k] = std::sqrt(var / static_cast<double>(trials));
    bias_sq += report.bias[k] * report.bias[k];
    se_sq += report.std_errors[k] * report.std_errors[k];
  }
  report.bias_l2 = std::sqrt(bias_sq);
  report.stderr_l2 = std::sqrt(se_sq);
  report.bounds = compute_bound_terms(state, q, grads, m);
  return report;
}

RatioCheck ratio_check(const SoftmaxState& state, const Vec& q, double nu, double delta) {
  check_q(state, q);
  const std::size_t n = state.num_classes();
  const double tau = state.tau;
  RatioCheck result;
  double z_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != state.target) z_t += std::exp(state.logits[i]);
  }
  std::size_t in_band = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == state.target) continue;
    const double ratio = std::exp(state.logits[i]) / (q[i] * z_t);
    const double cos_sim = state.logits[i] / tau;  // o_i = tau h.c_i
    result.classes.push_back(i);
    result.ratios.push_back(ratio);
    result.envelope.push_back(std::exp((tau - nu) * cos_sim));
    const double dev = std::fabs(ratio - 1.0);
    result.max_abs_dev = std::max(result.max_abs_dev, dev);
    result.mean_abs_dev += dev;
    if (dev <= delta) ++in_band;
  }
  const auto count = static_cast<double>(result.ratios.size());
  result.mean_abs_dev /= count;
  result.frac_in_band = static_cast<double>(in_band) / count;

  // Pearson correlation of log r_i with the envelope exponent.
  double mx = 0.0, my = 0.0;
  Vec log_r(result.ratios.size()), expo(result.ratios.size());
  for (std::size_t k = 0; k < result.ratios.size(); ++k) {
    log_r[k] = std::log(result.ratios[k]);
    expo[k] = std::log(result.envelope[k]);
    mx += expo[k];
    my += log_r[k];
  }
  mx /= count;
  my /= count;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < result.ratios.size(); ++k) {
    sxy += (expo[k] - mx) * (log_r[k] - my);
    sxx += (expo[k] - mx) * (expo[k] - mx);
    syy += (log_r[k] - my) * (log_r[k] - my);
  }
  result.envelope_correlation = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  return result;
}

}  // namespace rfs
