#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rfs/embedding.hpp"

namespace rfs {

/// A nonlinear map phi linearizing some kernel: K(x, y) ~ phi(x).phi(y).
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual void apply(std::span<const double> u, std::span<double> out) const = 0;

  Vec apply(std::span<const double> u) const {
    Vec out(feature_dim());
    apply(u, out);
    return out;
  }
};

/// Random Fourier features for the Gaussian kernel exp(-nu |x-y|^2 / 2).
/// Output is [cos(w_j.u)]_j then [sin(w_j.u)]_j, scaled by 1/sqrt(D), so
/// phi(u).phi(u) = 1 for every u and phi(x).phi(y) is an unbiased kernel
/// estimate. Frequencies are i.i.d. N(0, nu I): the spectral measure of
/// exp(-nu |delta|^2 / 2) has per-coordinate variance nu.
class RffMap final : public FeatureMap {
 public:
  RffMap(std::size_t d, std::size_t num_frequencies, double nu, std::uint64_t seed);

  using FeatureMap::apply;

  std::size_t input_dim() const override { return d_; }
  std::size_t feature_dim() const override { return 2 * num_frequencies_; }
  void apply(std::span<const double> u, std::span<double> out) const override;

  std::size_t num_frequencies() const { return num_frequencies_; }
  double nu() const { return nu_; }
  std::uint64_t seed() const { return seed_; }
  /// Row j of the D x d frequency matrix.
  std::span<const double> frequency(std::size_t j) const {
    return {frequencies_.data() + j * d_, d_};
  }

  /// Estimate of the exponential kernel exp(nu * x.y) for unit-norm inputs:
  /// exp(nu) * phi(x).phi(y).
  double exp_kernel_estimate(double feature_dot) const;

 private:
  std::size_t d_;
  std::size_t num_frequencies_;
  double nu_;
  std::uint64_t seed_;
  std::vector<double> frequencies_;  // D x d, row-major
};

/// Quadratic kernel alpha (x.y)^2 + 1, linearized exactly by
/// phi(z) = [sqrt(alpha) * vec(z z^T), 1].
class QuadraticMap final : public FeatureMap {
 public:
  QuadraticMap(std::size_t d, double alpha);

  using FeatureMap::apply;

  std::size_t input_dim() const override { return d_; }
  std::size_t feature_dim() const override { return d_ * d_ + 1; }
  void apply(std::span<const double> u, std::span<double> out) const override;

  double alpha() const { return alpha_; }
  double kernel(double xy) const { return alpha_ * xy * xy + 1.0; }

 private:
  std::size_t d_;
  double alpha_;
};

/// Random Maclaurin features for exp(tau * x.y): feature j picks a degree
/// k_j with P(k) = 2^-(k+1) and multiplies k_j Rademacher projections,
/// weighted so phi(x).phi(y) is unbiased. Baseline for kernel-MSE
/// comparisons only; never used for sampling.
class MaclaurinMap final : public FeatureMap {
 public:
  MaclaurinMap(std::size_t d, std::size_t num_features, double tau_kernel, std::uint64_t seed);

  using FeatureMap::apply;

  std::size_t input_dim() const override { return d_; }
  std::size_t feature_dim() const override { return num_features_; }
  void apply(std::span<const double> u, std::span<double> out) const override;

  double tau_kernel() const { return tau_; }

 private:
  std::size_t d_;
  std::size_t num_features_;
  double tau_;
  std::vector<std::uint32_t> degrees_;   // per feature
  std::vector<double> weights_;          // sqrt(tau^k / (k! P(k))) per feature
  std::vector<std::int8_t> signs_;       // concatenated k_j Rademacher d-vectors
  std::vector<std::size_t> sign_offset_; // start of feature j's sign block
};

RffMap build_rff(std::size_t d, std::size_t num_frequencies, double nu, std::uint64_t seed);

/// Mean squared error of a map's estimate of the exponential kernel
/// exp(tau * x.y) over the given pairs of unit vectors. For RFF the
/// estimate is exp(nu) * phi(x).phi(y) (callers pass nu = tau); for the
/// quadratic map it is the quadratic kernel itself; Maclaurin is a direct
/// unbiased estimator.
double kernel_mse(const FeatureMap& map, const std::vector<std::pair<Vec, Vec>>& pairs,
                  double tau);

/// MSE of phi(x).phi(y) against the map's own closed-form kernel
/// (quadratic: exact zero; RFF: Gaussian-kernel estimation error).
double own_kernel_mse(const FeatureMap& map, const std::vector<std::pair<Vec, Vec>>& pairs);

}  // namespace rfs
