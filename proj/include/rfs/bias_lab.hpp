#pragma once

#include <random>

#include "rfs/embedding.hpp"
#include "rfs/sampled_softmax.hpp"

namespace rfs {

/// Computable leading terms of the gradient-bias bounds plus the three
/// diagnostics they are built from. All quantities are evaluated over the
/// negative set N_t with a distribution q (q[target] ignored, the rest
/// strictly positive and summing to one).
struct BiasBounds {
  double max_grad_coord = 0.0;   // M
  double partition_negatives = 0.0;  // Z_t
  Vec weighted_grad_sum;         // g = sum_j e^{o_j} grad(o_j)
  double lb_term = 0.0;          // magnitude of the lower bound's leading term
  double ub1 = 0.0;
  double ub2 = 0.0;
  // diagnostics
  double sum_sq_ratio = 0.0;     // sum_j e^{2 o_j} / q_j
  double max_ratio_gap = 0.0;    // max_{j,j'} |e^{o_j}/q_j - e^{o_j'}/q_j'|
  Vec partition_gap;             // per class k: |Z_t - e^{o_k}/q_k| (0 at target)
};

BiasBounds compute_bound_terms(const SoftmaxState& state, const Vec& q,
                               const LogitGradTable& grads, std::size_t m);

struct Diagnostics {
  double sum_sq_ratio = 0.0;
  double max_ratio_gap = 0.0;
  Vec partition_gap;
};

Diagnostics eq13_diagnostics(const SoftmaxState& state, const Vec& q);

/// Exact E[gradient_estimate] by enumerating all (n-1)^m negative tuples
/// weighted by their product probability. Throws when the tuple count
/// exceeds 10^6.
Vec exact_expected_gradient(const SoftmaxState& state, const Vec& q, const LogitGradTable& grads,
                            std::size_t m, Scheme scheme = Scheme::uniform);

struct BiasReport {
  Vec bias;           // MC mean of the estimate minus the full gradient
  Vec std_errors;     // per coordinate
  std::size_t trials = 0;
  double bias_l2 = 0.0;
  double stderr_l2 = 0.0;
  BiasBounds bounds;
};

BiasReport mc_bias_report(const SoftmaxState& state, const Vec& q, const LogitGradTable& grads,
                          std::size_t m, std::size_t trials, std::mt19937_64& rng,
                          Scheme scheme = Scheme::uniform);

/// Per-negative-class normalized ratios r_i = e^{o_i} / (q_i Z_t) and the
/// multiplicative envelope e^{(tau - nu) h.c_i} they are expected to track.
/// The acceptance band (1 +/- delta) is a configured tolerance, not a
/// derived constant.
struct RatioCheck {
  std::vector<std::size_t> classes;  // the negatives, in index order
  Vec ratios;
  Vec envelope;
  double max_abs_dev = 0.0;   // max_i |r_i - 1|
  double mean_abs_dev = 0.0;
  double frac_in_band = 0.0;  // fraction with |r_i - 1| <= delta
  double envelope_correlation = 0.0;  // Pearson(log r_i, (tau - nu) h.c_i)
};

RatioCheck ratio_check(const SoftmaxState& state, const Vec& q, double nu, double delta = 0.15);

}  // namespace rfs
