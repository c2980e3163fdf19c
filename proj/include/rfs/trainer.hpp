#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rfs/embedding.hpp"
#include "rfs/feature_maps.hpp"
#include "rfs/sampled_softmax.hpp"
#include "rfs/sampler_tree.hpp"
#include "rfs/samplers.hpp"

namespace rfs {

struct SparseExample {
  std::vector<std::pair<std::uint32_t, double>> features;
  std::uint32_t label = 0;
};

/// Sparse text format: header "num_points num_features num_labels", then one
/// "label idx:val idx:val ..." line per example (0-based indices).
struct SparseDataset {
  std::size_t num_features = 0;  // v
  std::size_t num_labels = 0;    // n
  std::vector<SparseExample> examples;
};

SparseDataset load_dataset(const std::string& path);
void save_dataset(const SparseDataset& dataset, const std::string& path);

/// Labeled mixture: each class gets a sparse prototype; examples are noisy
/// copies of their class prototype.
SparseDataset make_synthetic_dataset(std::size_t num_classes, std::size_t num_features,
                                     std::size_t num_examples, std::uint64_t seed,
                                     std::size_t prototype_nnz = 10, double noise = 0.1);

/// Sparse-input linear classifier with normalized embeddings:
/// h = normalize(W^T x), o_i = tau * h.c_i.
struct Model {
  std::size_t v = 0;
  std::size_t d = 0;
  double tau = 1.0;
  std::vector<double> input_map;  // v x d, row-major
  ClassMatrix classes;

  static Model random_init(std::size_t v, std::size_t d, std::size_t n, double tau,
                           std::uint64_t seed);

  std::span<const double> input_row(std::size_t k) const { return {input_map.data() + k * d, d}; }
  std::span<double> input_row(std::size_t k) { return {input_map.data() + k * d, d}; }
  Vec embed(const SparseExample& x) const;
  Vec logits(const Vec& h) const;
};

struct EpochStats {
  double mean_sampled_loss = 0.0;
  double probe_full_loss = 0.0;
};

struct TrainConfig {
  Scheme scheme = Scheme::uniform;
  std::size_t m = 100;
  double lr = 0.1;
  std::size_t rff_frequencies = 512;
  double nu = 4.0;            // RFF kernel parameter
  double quadratic_alpha = 100.0;
  std::size_t probe_size = 500;
  std::uint64_t map_seed = 1;
};

/// Owns the feature map and sampler tree for kernel schemes and keeps them
/// consistent with the class embeddings across SGD steps.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  EpochStats train_epoch(const SparseDataset& dataset, std::mt19937_64& rng);

  const SamplerTree* tree() const { return tree_.get(); }
  const FeatureMap* feature_map() const { return map_.get(); }

 private:
  void apply_update(const SparseExample& x, const Vec& h, double inv_norm,
                    const std::vector<std::size_t>& touched, const Vec& class_weights);

  Model* model_;
  TrainConfig config_;
  std::unique_ptr<FeatureMap> map_;
  std::unique_ptr<SamplerTree> tree_;
};

double precision_at_k(const Model& model, const SparseDataset& dataset, std::size_t k);

/// Mean full softmax loss over the first probe_size examples.
double probe_full_loss(const Model& model, const SparseDataset& dataset, std::size_t probe_size);

}  // namespace rfs
