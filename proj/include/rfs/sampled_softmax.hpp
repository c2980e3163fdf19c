#pragma once

#include "rfs/embedding.hpp"
#include "rfs/samplers.hpp"

namespace rfs {

/// Adjusted logits o'_1 = o_t, o'_{i+1} = o_{s_i} - log(m q_{s_i}), with the
/// stable partition and sampled softmax probabilities over them.
struct AdjustedBatch {
  std::vector<std::size_t> classes;  // t, s_1, ..., s_m
  Vec adjusted_logits;               // m + 1 entries, [0] = o_t
  Vec probs;                         // sampled softmax distribution p'
  double partition = 0.0;            // Z'
  double log_partition = 0.0;
};

AdjustedBatch adjust_logits(const SampledBatch& batch, const SoftmaxState& state);

/// Same adjustment from pre-gathered logits (o_t plus one logit per sample),
/// for callers that avoid materializing all n logits.
AdjustedBatch adjust_logits_gathered(const SampledBatch& batch, double target_logit,
                                     const Vec& sample_logits);

/// Sampled softmax cross-entropy, -o_t + log Z'.
double sampled_loss(const AdjustedBatch& adjusted);

/// Gradient estimate of the full loss from one sampled batch:
/// -grad(o_t) + sum_j p'_j grad(o_{class_j}).
Vec gradient_estimate(const AdjustedBatch& adjusted, const LogitGradTable& grads);

/// Sampled cross-entropy with |o_i| in place of o_i (quadratic-kernel
/// baseline parity).
double absolute_softmax_loss(const SoftmaxState& state, const SampledBatch& batch);

}  // namespace rfs
