#include "rfs/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace rfs {

namespace {
constexpr std::size_t kMaxRejections = 10000;
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::uniform: return "uniform";
    case Scheme::log_uniform: return "loguniform";
    case Scheme::exp_softmax: return "exp";
    case Scheme::quadratic: return "quadratic";
    case Scheme::rff: return "rff";
    case Scheme::full: return "full";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "uniform") return Scheme::uniform;
  if (name == "loguniform") return Scheme::log_uniform;
  if (name == "exp") return Scheme::exp_softmax;
  if (name == "quadratic") return Scheme::quadratic;
  if (name == "rff") return Scheme::rff;
  if (name == "full") return Scheme::full;
  throw std::invalid_argument("unknown scheme: " + name);
}

SampledBatch NegativeSampler::sample_negatives(std::size_t target, std::size_t m,
                                               std::mt19937_64& rng) const {
  const std::size_t n = num_classes();
  if (n < 2) throw std::invalid_argument("need at least one negative class");
  if (m < 1) throw std::invalid_argument("need at least one sample");
  if (target >= n) throw std::out_of_range("target class out of range");
  SampledBatch batch;
  batch.target = target;
  batch.m = m;
  batch.scheme = scheme();
  batch.samples.reserve(m);
  batch.q_values.reserve(m);
  const double keep_mass = 1.0 - probability(target);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t s = target;
    std::size_t attempts = 0;
    while (s == target) {
      if (++attempts > kMaxRejections) {
        throw std::runtime_error("rejection sampling exceeded retry budget");
      }
      s = draw(rng);
    }
    batch.samples.push_back(s);
    batch.q_values.push_back(probability(s) / keep_mass);
  }
  return batch;
}

Vec NegativeSampler::negative_distribution(std::size_t target) const {
  const std::size_t n = num_classes();
  Vec q(n);
  const double keep_mass = 1.0 - probability(target);
  for (std::size_t i = 0; i < n; ++i) q[i] = probability(i) / keep_mass;
  q[target] = 0.0;
  return q;
}

std::size_t LogUniformSampler::draw(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // CDF(r) = log(r + 2) / log(n + 1), invertible in closed form.
  const double u = unit(rng);
  auto r = static_cast<std::size_t>(std::exp(u * log_np1_)) - 1;
  return r < n_ ? r : n_ - 1;
}

ExpSampler::ExpSampler(const SoftmaxState& state)
    : probs_(state.probs), dist_(state.probs.begin(), state.probs.end()) {}

KernelSampler::KernelSampler(const SamplerTree& tree, Vec query_features, Scheme tag)
    : tree_(&tree), query_(std::move(query_features)), tag_(tag) {
  if (query_.size() != tree.feature_dim()) throw std::invalid_argument("query dim mismatch");
}

SampledBatch KernelSampler::sample_negatives(std::size_t target, std::size_t m,
                                             std::mt19937_64& rng) const {
  const std::size_t n = num_classes();
  if (n < 2) throw std::invalid_argument("need at least one negative class");
  if (m < 1) throw std::invalid_argument("need at least one sample");
  if (target >= n) throw std::out_of_range("target class out of range");
  SampledBatch batch;
  batch.target = target;
  batch.m = m;
  batch.scheme = scheme();
  batch.samples.reserve(m);
  batch.q_values.reserve(m);
  const double keep_mass = 1.0 - tree_->exact_probability(query_, target);
  std::size_t rounds = 0;
  while (batch.samples.size() < m) {
    if (++rounds > kMaxRejections) {
      throw std::runtime_error("rejection sampling exceeded retry budget");
    }
    for (const auto& [s, p] : tree_->sample_many(query_, m - batch.samples.size(), rng)) {
      if (s == target) continue;
      batch.samples.push_back(s);
      batch.q_values.push_back(p / keep_mass);
    }
  }
  return batch;
}

Vec KernelSampler::negative_distribution(std::size_t target) const {
  Vec q = tree_->all_probabilities(query_);
  const double keep_mass = 1.0 - q[target];
  for (double& v : q) v /= keep_mass;
  q[target] = 0.0;
  return q;
}

}  // namespace rfs
