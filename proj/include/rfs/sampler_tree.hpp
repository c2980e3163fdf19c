#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "rfs/embedding.hpp"
#include "rfs/feature_maps.hpp"

namespace rfs {

/// Array-backed complete binary sum-tree over class feature vectors.
/// Node k stores sum_{j in subtree(k)} phi(c_j); sampling descends the tree
/// choosing left with probability mass(left) / (mass(left) + mass(right)),
/// where mass(node) = max(query . node_sum, mass_floor * live_leaves(node)).
/// Virtual padding leaves (n rounded up to a power of two) carry zero
/// features and zero live count, so they are never sampled.
///
/// Single-writer / multi-reader: callers serialize update_class against
/// concurrent sampling.
class SamplerTree {
 public:
  SamplerTree(const ClassMatrix& classes, const FeatureMap& map, double mass_floor = 1e-6,
              std::size_t refresh_interval = 100000);

  std::size_t num_classes() const { return n_; }
  std::size_t feature_dim() const { return feature_dim_; }

  /// Draws a class index with probability exact_probability(query, i).
  std::size_t sample_class(std::span<const double> query_features, std::mt19937_64& rng) const;

  /// Draw plus the probability of that draw, from a single descent.
  std::pair<std::size_t, double> sample_with_probability(std::span<const double> query_features,
                                                         std::mt19937_64& rng) const;

  /// `count` independent draws with their probabilities. All descents
  /// advance level by level together so their node reads overlap in the
  /// memory system instead of paying one full miss latency per level.
  std::vector<std::pair<std::size_t, double>> sample_many(std::span<const double> query_features,
                                                          std::size_t count,
                                                          std::mt19937_64& rng) const;

  /// Replaces leaf i with phi(new_embedding) and adjusts the log(n)
  /// ancestor sums by the feature delta.
  void update_class(std::size_t i, std::span<const double> new_embedding, const FeatureMap& map);

  /// Exact probability the sampler assigns to class i for this query:
  /// the product of floored descent ratios along the root-to-leaf path.
  double exact_probability(std::span<const double> query_features, std::size_t i) const;

  /// exact_probability for every class, one O(n F) sweep.
  Vec all_probabilities(std::span<const double> query_features) const;

  /// Recomputes all internal sums from the leaf features.
  void refresh();

  std::span<const double> node_sum(std::size_t node) const {
    return {sums_.data() + node * feature_dim_, feature_dim_};
  }
  std::size_t num_leaves() const { return leaf_count_; }
  std::size_t leaf_node(std::size_t i) const { return leaf_count_ + i; }
  double mass_floor() const { return mass_floor_; }

 private:
  double node_mass(std::span<const double> query, std::size_t node) const;
  double floored_mass(double raw, std::size_t node) const {
    if (live_[node] == 0) return 0.0;
    const double floor = mass_floor_ * static_cast<double>(live_[node]);
    return raw > floor ? raw : floor;
  }
  std::span<double> mutable_sum(std::size_t node) {
    return {sums_.data() + node * feature_dim_, feature_dim_};
  }

  std::size_t n_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t leaf_count_ = 0;  // power of two >= n
  double mass_floor_;
  std::size_t refresh_interval_;
  std::size_t updates_since_refresh_ = 0;
  std::vector<double> sums_;        // (2 * leaf_count) * feature_dim, node 1 = root
  std::vector<std::uint32_t> live_; // real leaves under each node
};

}  // namespace rfs
