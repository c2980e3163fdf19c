#include "rfs/feature_maps.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace rfs {

RffMap::RffMap(std::size_t d, std::size_t num_frequencies, double nu, std::uint64_t seed)
    : d_(d), num_frequencies_(num_frequencies), nu_(nu), seed_(seed) {
  if (d == 0 || num_frequencies == 0) throw std::invalid_argument("non-positive dimension");
  if (!(nu > 0.0)) throw std::invalid_argument("non-positive nu");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(nu));
  frequencies_.resize(num_frequencies * d);
  for (double& w : frequencies_) w = gauss(rng);
}

void RffMap::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != d_) throw std::invalid_argument("embedding dimension mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_frequencies_));
  for (std::size_t j = 0; j < num_frequencies_; ++j) {
    const double proj = dot(frequency(j), u);
    out[j] = scale * std::cos(proj);
    out[num_frequencies_ + j] = scale * std::sin(proj);
  }
}

double RffMap::exp_kernel_estimate(double feature_dot) const {
  return std::exp(nu_) * feature_dot;
}

QuadraticMap::QuadraticMap(std::size_t d, double alpha) : d_(d), alpha_(alpha) {
  if (d == 0) throw std::invalid_argument("non-positive dimension");
  if (!(alpha > 0.0)) throw std::invalid_argument("non-positive alpha");
}

void QuadraticMap::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != d_) throw std::invalid_argument("embedding dimension mismatch");
  const double root_alpha = std::sqrt(alpha_);
  for (std::size_t i = 0; i < d_; ++i) {
    for (std::size_t j = 0; j < d_; ++j) out[i * d_ + j] = root_alpha * u[i] * u[j];
  }
  out[d_ * d_] = 1.0;
}

MaclaurinMap::MaclaurinMap(std::size_t d, std::size_t num_features, double tau_kernel,
                           std::uint64_t seed)
    : d_(d), num_features_(num_features), tau_(tau_kernel) {
  if (d == 0 || num_features == 0) throw std::invalid_argument("non-positive dimension");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  degrees_.resize(num_features_);
  weights_.resize(num_features_);
  sign_offset_.resize(num_features_ + 1, 0);
  for (std::size_t f = 0; f < num_features_; ++f) {
    // degree k with P(k) = 2^-(k+1), k = 0, 1, ...
    std::uint32_t k = 0;
    while (coin(rng) == 1) ++k;
    degrees_[f] = k;
    double coeff = 1.0;  // tau^k / k!
    for (std::uint32_t j = 1; j <= k; ++j) coeff *= tau_ / j;
    const double pk = std::pow(2.0, -static_cast<double>(k) - 1.0);
    weights_[f] = std::sqrt(coeff / pk / static_cast<double>(num_features_));
    sign_offset_[f + 1] = sign_offset_[f] + k * d_;
  }
  signs_.resize(sign_offset_.back());
  for (std::int8_t& s : signs_) s = coin(rng) == 1 ? 1 : -1;
}

void MaclaurinMap::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != d_) throw std::invalid_argument("embedding dimension mismatch");
  for (std::size_t f = 0; f < num_features_; ++f) {
    double prod = weights_[f];
    const std::int8_t* sign = signs_.data() + sign_offset_[f];
    for (std::uint32_t j = 0; j < degrees_[f]; ++j, sign += d_) {
      double proj = 0.0;
      for (std::size_t k = 0; k < d_; ++k) proj += sign[k] * u[k];
      prod *= proj;
    }
    out[f] = prod;
  }
}

RffMap build_rff(std::size_t d, std::size_t num_frequencies, double nu, std::uint64_t seed) {
  return RffMap(d, num_frequencies, nu, seed);
}

double kernel_mse(const FeatureMap& map, const std::vector<std::pair<Vec, Vec>>& pairs,
                  double tau) {
  if (pairs.empty()) throw std::invalid_argument("empty pair list");
  Vec fx(map.feature_dim()), fy(map.feature_dim());
  double sum_sq = 0.0;
  for (const auto& [x, y] : pairs) {
    map.apply(x, fx);
    map.apply(y, fy);
    const double feature_dot = dot(fx, fy);
    double estimate = feature_dot;
    if (const auto* rff = dynamic_cast<const RffMap*>(&map)) {
      estimate = rff->exp_kernel_estimate(feature_dot);
    }
    const double exact = std::exp(tau * dot(x, y));
    const double err = estimate - exact;
    sum_sq += err * err;
  }
  return sum_sq / static_cast<double>(pairs.size());
}

double own_kernel_mse(const FeatureMap& map, const std::vector<std::pair<Vec, Vec>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("empty pair list");
  Vec fx(map.feature_dim()), fy(map.feature_dim());
  double sum_sq = 0.0;
  for (const auto& [x, y] : pairs) {
    map.apply(x, fx);
    map.apply(y, fy);
    double exact;
    if (const auto* quad = dynamic_cast<const QuadraticMap*>(&map)) {
      exact = quad->kernel(dot(x, y));
    } else if (const auto* rff = dynamic_cast<const RffMap*>(&map)) {
      Vec delta(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) delta[k] = x[k] - y[k];
      exact = std::exp(-rff->nu() * dot(delta, delta) / 2.0);
    } else if (const auto* mac = dynamic_cast<const MaclaurinMap*>(&map)) {
      exact = std::exp(mac->tau_kernel() * dot(x, y));
    } else {
      throw std::invalid_argument("map has no closed-form kernel");
    }
    const double err = dot(fx, fy) - exact;
    sum_sq += err * err;
  }
  return sum_sq / static_cast<double>(pairs.size());
}

}  // namespace rfs
