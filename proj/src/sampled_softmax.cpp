#include "rfs/sampled_softmax.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfs {

namespace {

AdjustedBatch adjust_from_gathered(const SampledBatch& batch, double target_logit,
                                   const Vec& sample_logits) {
  AdjustedBatch out;
  out.classes.reserve(batch.m + 1);
  out.classes.push_back(batch.target);
  out.adjusted_logits.reserve(batch.m + 1);
  out.adjusted_logits.push_back(target_logit);
  const double log_m = std::log(static_cast<double>(batch.m));
  for (std::size_t i = 0; i < batch.m; ++i) {
    const double q = batch.q_values[i];
    if (!(q > 0.0)) throw std::invalid_argument("non-positive sample probability");
    out.classes.push_back(batch.samples[i]);
    out.adjusted_logits.push_back(sample_logits[i] - log_m - std::log(q));
  }
  const double max_logit =
      *std::max_element(out.adjusted_logits.begin(), out.adjusted_logits.end());
  double shifted_sum = 0.0;
  for (double o : out.adjusted_logits) shifted_sum += std::exp(o - max_logit);
  out.log_partition = max_logit + std::log(shifted_sum);
  out.partition = std::exp(out.log_partition);
  out.probs.resize(out.adjusted_logits.size());
  for (std::size_t j = 0; j < out.probs.size(); ++j) {
    out.probs[j] = std::exp(out.adjusted_logits[j] - out.log_partition);
  }
  return out;
}

AdjustedBatch adjust_from_logits(const SampledBatch& batch, const Vec& logits) {
  Vec sample_logits(batch.m);
  for (std::size_t i = 0; i < batch.m; ++i) sample_logits[i] = logits[batch.samples[i]];
  return adjust_from_gathered(batch, logits[batch.target], sample_logits);
}

}  // namespace

AdjustedBatch adjust_logits(const SampledBatch& batch, const SoftmaxState& state) {
  if (batch.target >= state.num_classes()) throw std::out_of_range("target out of range");
  return adjust_from_logits(batch, state.logits);
}

AdjustedBatch adjust_logits_gathered(const SampledBatch& batch, double target_logit,
                                     const Vec& sample_logits) {
  if (sample_logits.size() != batch.m) throw std::invalid_argument("sample logit count mismatch");
  return adjust_from_gathered(batch, target_logit, sample_logits);
}

double sampled_loss(const AdjustedBatch& adjusted) {
  return -adjusted.adjusted_logits[0] + adjusted.log_partition;
}

Vec gradient_estimate(const AdjustedBatch& adjusted, const LogitGradTable& grads) {
  // Direct form of the estimator: the ratio weights are exactly the
  // sampled softmax probabilities p'_j.
  Vec out(grads.dim, 0.0);
  for (std::size_t j = 0; j < adjusted.classes.size(); ++j) {
    const double w = adjusted.probs[j];
    auto g = grads.row(adjusted.classes[j]);
    for (std::size_t k = 0; k < grads.dim; ++k) out[k] += w * g[k];
  }
  auto gt = grads.row(adjusted.classes[0]);
  for (std::size_t k = 0; k < grads.dim; ++k) out[k] -= gt[k];
  return out;
}

double absolute_softmax_loss(const SoftmaxState& state, const SampledBatch& batch) {
  Vec abs_logits(state.logits.size());
  for (std::size_t i = 0; i < abs_logits.size(); ++i) abs_logits[i] = std::fabs(state.logits[i]);
  const AdjustedBatch adjusted = adjust_from_logits(batch, abs_logits);
  return sampled_loss(adjusted);
}

}  // namespace rfs
