#pragma once

#include <random>
#include <string>
#include <vector>

#include "rfs/embedding.hpp"
#include "rfs/sampler_tree.hpp"

namespace rfs {

enum class Scheme { uniform, log_uniform, exp_softmax, quadratic, rff, full };

std::string scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name);

/// Target t, m i.i.d. negatives drawn with replacement, and the exact
/// probability of each draw under the negative distribution over N_t.
struct SampledBatch {
  std::size_t target = 0;
  std::size_t m = 0;
  std::vector<std::size_t> samples;
  Vec q_values;
  Scheme scheme = Scheme::uniform;
};

/// A negative-sampling scheme: a distribution over all n classes plus
/// target exclusion by rejection, with the rejected mass folded back into
/// the reported probabilities (q_i / (1 - q_t)).
class NegativeSampler {
 public:
  virtual ~NegativeSampler() = default;
  virtual Scheme scheme() const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Probability of class i under the unrestricted law over [n].
  virtual double probability(std::size_t i) const = 0;
  virtual std::size_t draw(std::mt19937_64& rng) const = 0;

  virtual SampledBatch sample_negatives(std::size_t target, std::size_t m,
                                        std::mt19937_64& rng) const;

  /// The exact law of sample_negatives over N_t: q_i / (1 - q_t), zero at
  /// the target.
  virtual Vec negative_distribution(std::size_t target) const;
};

class UniformSampler final : public NegativeSampler {
 public:
  explicit UniformSampler(std::size_t n) : n_(n) {}
  Scheme scheme() const override { return Scheme::uniform; }
  std::size_t num_classes() const override { return n_; }
  double probability(std::size_t) const override { return 1.0 / static_cast<double>(n_); }
  std::size_t draw(std::mt19937_64& rng) const override {
    return std::uniform_int_distribution<std::size_t>(0, n_ - 1)(rng);
  }

 private:
  std::size_t n_;
};

/// Rank-based log-uniform law P(r) = log(1 + 1/(r+1)) / log(n+1) with class
/// indices as ranks; inverse-CDF draw in O(1).
class LogUniformSampler final : public NegativeSampler {
 public:
  explicit LogUniformSampler(std::size_t n) : n_(n), log_np1_(std::log(n + 1.0)) {}
  Scheme scheme() const override { return Scheme::log_uniform; }
  std::size_t num_classes() const override { return n_; }
  double probability(std::size_t i) const override {
    return std::log1p(1.0 / (static_cast<double>(i) + 1.0)) / log_np1_;
  }
  std::size_t draw(std::mt19937_64& rng) const override;

 private:
  std::size_t n_;
  double log_np1_;
};

/// Softmax-distribution sampling, q_i = e^{o_i} / Z; restricted to N_t this
/// is the Exp baseline q_i = e^{o_i} / Z_t. Construction is O(n).
class ExpSampler final : public NegativeSampler {
 public:
  explicit ExpSampler(const SoftmaxState& state);
  Scheme scheme() const override { return Scheme::exp_softmax; }
  std::size_t num_classes() const override { return probs_.size(); }
  double probability(std::size_t i) const override { return probs_[i]; }
  std::size_t draw(std::mt19937_64& rng) const override { return dist_(rng); }

 private:
  Vec probs_;
  mutable std::discrete_distribution<std::size_t> dist_;
};

/// Kernel-based sampling through a SamplerTree; the tag distinguishes the
/// quadratic and RFF schemes sharing this implementation.
class KernelSampler final : public NegativeSampler {
 public:
  KernelSampler(const SamplerTree& tree, Vec query_features, Scheme tag);
  Scheme scheme() const override { return tag_; }
  std::size_t num_classes() const override { return tree_->num_classes(); }
  double probability(std::size_t i) const override {
    return tree_->exact_probability(query_, i);
  }
  std::size_t draw(std::mt19937_64& rng) const override {
    return tree_->sample_class(query_, rng);
  }
  /// Single-descent draws: the probability of each draw comes from the
  /// descent itself instead of a second root-to-leaf pass.
  SampledBatch sample_negatives(std::size_t target, std::size_t m,
                                std::mt19937_64& rng) const override;
  Vec negative_distribution(std::size_t target) const override;

 private:
  const SamplerTree* tree_;
  Vec query_;
  Scheme tag_;
};

}  // namespace rfs
