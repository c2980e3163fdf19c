#include "rfs/sampler_tree.hpp"

#include <bit>
#include <stdexcept>

namespace rfs {

SamplerTree::SamplerTree(const ClassMatrix& classes, const FeatureMap& map, double mass_floor,
                         std::size_t refresh_interval)
    : n_(classes.n),
      feature_dim_(map.feature_dim()),
      mass_floor_(mass_floor),
      refresh_interval_(refresh_interval) {
  if (n_ < 2) throw std::invalid_argument("need at least two classes");
  leaf_count_ = std::bit_ceil(n_);
  sums_.assign(2 * leaf_count_ * feature_dim_, 0.0);
  live_.assign(2 * leaf_count_, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    map.apply(classes.row(i), mutable_sum(leaf_node(i)));
    live_[leaf_node(i)] = 1;
  }
  for (std::size_t node = leaf_count_ - 1; node >= 1; --node) {
    live_[node] = live_[2 * node] + live_[2 * node + 1];
  }
  refresh();
}

void SamplerTree::refresh() {
  for (std::size_t node = leaf_count_ - 1; node >= 1; --node) {
    auto out = mutable_sum(node);
    auto left = node_sum(2 * node);
    auto right = node_sum(2 * node + 1);
    for (std::size_t k = 0; k < feature_dim_; ++k) out[k] = left[k] + right[k];
  }
  updates_since_refresh_ = 0;
}

double SamplerTree::node_mass(std::span<const double> query, std::size_t node) const {
  if (live_[node] == 0) return 0.0;
  const double raw = dot(query, node_sum(node));
  const double floor = mass_floor_ * static_cast<double>(live_[node]);
  return raw > floor ? raw : floor;
}

std::pair<std::size_t, double> SamplerTree::sample_with_probability(
    std::span<const double> query_features, std::mt19937_64& rng) const {
  return sample_many(query_features, 1, rng).front();
}

std::vector<std::pair<std::size_t, double>> SamplerTree::sample_many(
    std::span<const double> query_features, std::size_t count, std::mt19937_64& rng) const {
  if (query_features.size() != feature_dim_) throw std::invalid_argument("query dim mismatch");
  const double raw_root = dot(query_features, node_sum(1));
  if (!(floored_mass(raw_root, 1) > 0.0)) {
    throw std::runtime_error("degenerate sampling distribution");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> node(count, 1);
  std::vector<double> raw(count, raw_root);
  std::vector<double> prob(count, 1.0);
  // One dot product per level and per walk: the raw sibling mass follows
  // from the parent's raw mass, since node sums are sums of their children.
  for (std::size_t width = 1; width < leaf_count_; width *= 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double* child = sums_.data() + 2 * node[i] * feature_dim_;
      for (std::size_t k = 0; k < feature_dim_; k += 8) __builtin_prefetch(child + k);
      __builtin_prefetch(live_.data() + 2 * node[i]);
    }
    for (std::size_t i = 0; i < count; ++i) {
      const double raw_left = dot(query_features, node_sum(2 * node[i]));
      const double left = floored_mass(raw_left, 2 * node[i]);
      const double right = floored_mass(raw[i] - raw_left, 2 * node[i] + 1);
      const double total = left + right;
      if (unit(rng) * total < left) {
        prob[i] *= left / total;
        raw[i] = raw_left;
        node[i] = 2 * node[i];
      } else {
        prob[i] *= right / total;
        raw[i] -= raw_left;
        node[i] = 2 * node[i] + 1;
      }
    }
  }
  std::vector<std::pair<std::size_t, double>> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {node[i] - leaf_count_, prob[i]};
  return out;
}

std::size_t SamplerTree::sample_class(std::span<const double> query_features,
                                      std::mt19937_64& rng) const {
  return sample_with_probability(query_features, rng).first;
}

void SamplerTree::update_class(std::size_t i, std::span<const double> new_embedding,
                               const FeatureMap& map) {
  if (i >= n_) throw std::out_of_range("class index out of range");
  Vec fresh(feature_dim_);
  map.apply(new_embedding, fresh);
  auto leaf = mutable_sum(leaf_node(i));
  Vec delta(feature_dim_);
  for (std::size_t k = 0; k < feature_dim_; ++k) {
    delta[k] = fresh[k] - leaf[k];
    leaf[k] = fresh[k];
  }
  for (std::size_t node = leaf_node(i) / 2; node >= 1; node /= 2) {
    auto sum = mutable_sum(node);
    for (std::size_t k = 0; k < feature_dim_; ++k) sum[k] += delta[k];
  }
  if (++updates_since_refresh_ >= refresh_interval_) refresh();
}

double SamplerTree::exact_probability(std::span<const double> query_features,
                                      std::size_t i) const {
  if (i >= n_) throw std::out_of_range("class index out of range");
  if (!(node_mass(query_features, 1) > 0.0)) {
    throw std::runtime_error("degenerate sampling distribution");
  }
  double prob = 1.0;
  std::size_t node = leaf_node(i);
  while (node > 1) {
    const std::size_t parent = node / 2;
    const double own = node_mass(query_features, node);
    const double sibling = node_mass(query_features, node ^ 1);
    prob *= own / (own + sibling);
    node = parent;
  }
  return prob;
}

Vec SamplerTree::all_probabilities(std::span<const double> query_features) const {
  // Single top-down sweep over node masses instead of n path descents.
  if (!(node_mass(query_features, 1) > 0.0)) {
    throw std::runtime_error("degenerate sampling distribution");
  }
  std::vector<double> reach(2 * leaf_count_, 0.0);
  reach[1] = 1.0;
  for (std::size_t node = 1; node < leaf_count_; ++node) {
    if (reach[node] == 0.0) continue;
    const double left = node_mass(query_features, 2 * node);
    const double right = node_mass(query_features, 2 * node + 1);
    const double total = left + right;
    if (total <= 0.0) continue;
    reach[2 * node] = reach[node] * left / total;
    reach[2 * node + 1] = reach[node] * right / total;
  }
  Vec probs(n_);
  for (std::size_t i = 0; i < n_; ++i) probs[i] = reach[leaf_node(i)];
  return probs;
}

}  // namespace rfs
