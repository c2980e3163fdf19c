#include "rfs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rfs {

SparseDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  SparseDataset dataset;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  ++line_no;
  std::size_t declared_points = 0;
  {
    std::istringstream header(line);
    if (!(header >> declared_points >> dataset.num_features >> dataset.num_labels)) {
      throw std::runtime_error(path + ":1: malformed header");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    SparseExample ex;
    long label = -1;
    if (!(ls >> label) || label < 0 || static_cast<std::size_t>(label) >= dataset.num_labels) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad label");
    }
    ex.label = static_cast<std::uint32_t>(label);
    std::string token;
    while (ls >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed feature '" +
                                 token + "'");
      }
      std::size_t idx_end = 0;
      unsigned long idx = 0;
      double val = 0.0;
      try {
        idx = std::stoul(token.substr(0, colon), &idx_end);
        val = std::stod(token.substr(colon + 1));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed feature '" +
                                 token + "'");
      }
      if (idx >= dataset.num_features) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": feature index out of range");
      }
      ex.features.emplace_back(static_cast<std::uint32_t>(idx), val);
    }
    if (ex.features.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": example has no features");
    }
    dataset.examples.push_back(std::move(ex));
  }
  if (dataset.examples.empty()) throw std::runtime_error("dataset has no examples: " + path);
  return dataset;
}

void save_dataset(const SparseDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out << dataset.examples.size() << ' ' << dataset.num_features << ' ' << dataset.num_labels
      << '\n';
  char buf[64];
  for (const auto& ex : dataset.examples) {
    out << ex.label;
    for (const auto& [idx, val] : ex.features) {
      std::snprintf(buf, sizeof(buf), " %u:%.17g", idx, val);
      out << buf;
    }
    out << '\n';
  }
}

SparseDataset make_synthetic_dataset(std::size_t num_classes, std::size_t num_features,
                                     std::size_t num_examples, std::uint64_t seed,
                                     std::size_t prototype_nnz, double noise) {
  SparseDataset dataset;
  dataset.num_features = num_features;
  dataset.num_labels = num_classes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> feature_pick(
      0, static_cast<std::uint32_t>(num_features - 1));

  std::vector<std::vector<std::pair<std::uint32_t, double>>> prototypes(num_classes);
  for (auto& proto : prototypes) {
    std::unordered_set<std::uint32_t> used;
    while (used.size() < prototype_nnz) used.insert(feature_pick(rng));
    for (std::uint32_t idx : used) proto.emplace_back(idx, gauss(rng));
    std::sort(proto.begin(), proto.end());
  }

  std::uniform_int_distribution<std::uint32_t> label_pick(
      0, static_cast<std::uint32_t>(num_classes - 1));
  dataset.examples.resize(num_examples);
  for (auto& ex : dataset.examples) {
    ex.label = label_pick(rng);
    ex.features = prototypes[ex.label];
    for (auto& [idx, val] : ex.features) val += noise * gauss(rng);
  }
  return dataset;
}

Model Model::random_init(std::size_t v, std::size_t d, std::size_t n, double tau,
                         std::uint64_t seed) {
  Model model;
  model.v = v;
  model.d = d;
  model.tau = tau;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  model.input_map.resize(v * d);
  for (double& w : model.input_map) w = gauss(rng);
  model.classes = ClassMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    Vec c(d);
    for (double& x : c) x = gauss(rng);
    model.classes.set_row(i, normalize(std::move(c)));
  }
  return model;
}

Vec Model::embed(const SparseExample& x) const {
  Vec u(d, 0.0);
  for (const auto& [idx, val] : x.features) {
    auto row = input_row(idx);
    for (std::size_t k = 0; k < d; ++k) u[k] += val * row[k];
  }
  return normalize(std::move(u));
}

Vec Model::logits(const Vec& h) const {
  Vec o(classes.n);
  for (std::size_t i = 0; i < classes.n; ++i) o[i] = tau * dot(h, classes.row(i));
  return o;
}

Trainer::Trainer(Model& model, TrainConfig config) : model_(&model), config_(config) {
  if (config_.scheme == Scheme::rff) {
    map_ = std::make_unique<RffMap>(model.d, config_.rff_frequencies, config_.nu,
                                    config_.map_seed);
  } else if (config_.scheme == Scheme::quadratic) {
    map_ = std::make_unique<QuadraticMap>(model.d, config_.quadratic_alpha);
  }
  if (map_) tree_ = std::make_unique<SamplerTree>(model.classes, *map_);
}

void Trainer::apply_update(const SparseExample& x, const Vec& h, double inv_norm,
                           const std::vector<std::size_t>& touched, const Vec& class_weights) {
  Model& model = *model_;
  const std::size_t d = model.d;
  const double tau = model.tau;

  // dL/dh with the pre-update class embeddings.
  Vec grad_h(d, 0.0);
  for (std::size_t j = 0; j < touched.size(); ++j) {
    auto c = model.classes.row(touched[j]);
    const double w = tau * class_weights[j];
    for (std::size_t k = 0; k < d; ++k) grad_h[k] += w * c[k];
  }

  // Class embedding steps, with projection back to the unit sphere.
  for (std::size_t j = 0; j < touched.size(); ++j) {
    const std::size_t i = touched[j];
    auto c = model.classes.row(i);
    const double step = config_.lr * tau * class_weights[j];
    Vec updated(d);
    for (std::size_t k = 0; k < d; ++k) updated[k] = c[k] - step * h[k];
    model.classes.set_row(i, normalize(std::move(updated)));
    if (tree_ && config_.lr != 0.0) tree_->update_class(i, model.classes.row(i), *map_);
  }

  // Backprop through h = u / |u|: dL/du = (I - h h^T) dL/dh / |u|.
  const double along = dot(grad_h, h);
  for (std::size_t k = 0; k < d; ++k) grad_h[k] = inv_norm * (grad_h[k] - along * h[k]);
  for (const auto& [idx, val] : x.features) {
    auto row = model.input_row(idx);
    const double step = config_.lr * val;
    for (std::size_t k = 0; k < d; ++k) row[k] -= step * grad_h[k];
  }
}

EpochStats Trainer::train_epoch(const SparseDataset& dataset, std::mt19937_64& rng) {
  Model& model = *model_;
  const std::size_t n = model.classes.n;
  double loss_sum = 0.0;
  std::size_t steps = 0;

  for (const auto& ex : dataset.examples) {
    Vec u(model.d, 0.0);
    for (const auto& [idx, val] : ex.features) {
      auto row = model.input_row(idx);
      for (std::size_t k = 0; k < model.d; ++k) u[k] += val * row[k];
    }
    const double norm = l2_norm(u);
    Vec h = normalize(u);
    const std::size_t t = ex.label;

    double loss = 0.0;
    std::vector<std::size_t> touched;
    Vec class_weights;

    if (config_.scheme == Scheme::full) {
      const SoftmaxState state =
          softmax_state_from_logits(model.logits(h), t, model.tau);
      loss = full_loss(state);
      touched.resize(n);
      class_weights.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        touched[i] = i;
        class_weights[i] = state.probs[i] - (i == t ? 1.0 : 0.0);
      }
    } else {
      SampledBatch batch;
      if (config_.scheme == Scheme::exp_softmax) {
        const SoftmaxState state =
            softmax_state_from_logits(model.logits(h), t, model.tau);
        batch = ExpSampler(state).sample_negatives(t, config_.m, rng);
      } else if (config_.scheme == Scheme::uniform) {
        batch = UniformSampler(n).sample_negatives(t, config_.m, rng);
      } else if (config_.scheme == Scheme::log_uniform) {
        batch = LogUniformSampler(n).sample_negatives(t, config_.m, rng);
      } else {
        batch = KernelSampler(*tree_, map_->apply(h), config_.scheme)
                    .sample_negatives(t, config_.m, rng);
      }
      Vec sample_logits(batch.m);
      for (std::size_t i = 0; i < batch.m; ++i) {
        sample_logits[i] = model.tau * dot(h, model.classes.row(batch.samples[i]));
      }
      const double target_logit = model.tau * dot(h, model.classes.row(t));
      const AdjustedBatch adjusted = adjust_logits_gathered(batch, target_logit, sample_logits);
      loss = sampled_loss(adjusted);

      // Fold duplicate samples into one weight per distinct class.
      touched.push_back(t);
      class_weights.push_back(adjusted.probs[0] - 1.0);
      for (std::size_t j = 1; j < adjusted.classes.size(); ++j) {
        const std::size_t cls = adjusted.classes[j];
        auto it = std::find(touched.begin(), touched.end(), cls);
        if (it == touched.end()) {
          touched.push_back(cls);
          class_weights.push_back(adjusted.probs[j]);
        } else {
          class_weights[static_cast<std::size_t>(it - touched.begin())] += adjusted.probs[j];
        }
      }
    }

    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite loss at step " + std::to_string(steps) +
                               " (target " + std::to_string(t) + ")");
    }
    loss_sum += loss;
    ++steps;
    if (config_.lr != 0.0) apply_update(ex, h, 1.0 / norm, touched, class_weights);
  }

  EpochStats stats;
  stats.mean_sampled_loss = loss_sum / static_cast<double>(steps);
  stats.probe_full_loss = probe_full_loss(model, dataset, config_.probe_size);
  return stats;
}

double probe_full_loss(const Model& model, const SparseDataset& dataset, std::size_t probe_size) {
  const std::size_t count = std::min(probe_size, dataset.examples.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& ex = dataset.examples[i];
    const SoftmaxState state =
        softmax_state_from_logits(model.logits(model.embed(ex)), ex.label, model.tau);
    sum += full_loss(state);
  }
  return sum / static_cast<double>(count);
}

double precision_at_k(const Model& model, const SparseDataset& dataset, std::size_t k) {
  if (dataset.examples.empty()) throw std::invalid_argument("empty dataset");
  if (k > model.classes.n) throw std::invalid_argument("k exceeds class count");
  std::size_t hits = 0;
  for (const auto& ex : dataset.examples) {
    const Vec o = model.logits(model.embed(ex));
    const double target_logit = o[ex.label];
    std::size_t above = 0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (o[i] > target_logit) ++above;
    }
    if (above < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.examples.size());
}

}  // namespace rfs
