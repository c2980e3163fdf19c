// rfsmx: experiment runner for the sampled-softmax library. Every
// subcommand writes one CSV (a '#' metadata line, a header row, then data
// rows) to --out or stdout.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rfs/bias_lab.hpp"
#include "rfs/feature_maps.hpp"
#include "rfs/sampled_softmax.hpp"
#include "rfs/sampler_tree.hpp"
#include "rfs/samplers.hpp"
#include "rfs/trainer.hpp"

namespace {

struct Config {
  std::string scheme = "rff";
  std::size_t n = 1000;
  std::size_t d = 10;
  std::size_t v = 1000;
  std::size_t num_rff = 100;
  std::size_t m = 100;
  double softmax_temp = 0.3;
  double rff_temp = 0.5;
  double alpha = 100.0;
  std::uint64_t seed = 42;
  std::size_t epochs = 5;
  double lr = 0.1;
  std::size_t trials = 10000;
  std::string data_path;
  bool synthetic = false;
  std::string out_path;

  double tau() const { return 1.0 / (softmax_temp * softmax_temp); }
  double nu() const { return 1.0 / (rff_temp * rff_temp); }
};

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write output: " + path);
      out_ = &file_;
    } else {
      out_ = &std::cout;
    }
    out_->precision(12);
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

void write_metadata(std::ostream& out, const std::string& subcommand, const Config& cfg) {
  out << "# cmd=" << subcommand << " scheme=" << cfg.scheme << " n=" << cfg.n << " d=" << cfg.d
      << " v=" << cfg.v << " D=" << cfg.num_rff << " m=" << cfg.m
      << " softmax_temp=" << cfg.softmax_temp << " rff_temp=" << cfg.rff_temp
      << " alpha=" << cfg.alpha << " seed=" << cfg.seed << " epochs=" << cfg.epochs
      << " lr=" << cfg.lr << " trials=" << cfg.trials << '\n';
}

std::vector<std::pair<rfs::Vec, rfs::Vec>> random_unit_pairs(std::size_t count, std::size_t d,
                                                             std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::pair<rfs::Vec, rfs::Vec>> pairs(count);
  for (auto& [x, y] : pairs) {
    x.resize(d);
    y.resize(d);
    for (double& c : x) c = gauss(rng);
    for (double& c : y) c = gauss(rng);
    x = rfs::normalize(std::move(x));
    y = rfs::normalize(std::move(y));
  }
  return pairs;
}

/// Class embeddings correlated with a center direction, giving the large
/// kernel values where the ratio diagnostics are informative.
rfs::ClassMatrix clustered_classes(std::size_t n, std::size_t d, const rfs::Vec& center,
                                   double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  rfs::ClassMatrix classes(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    rfs::Vec c(d);
    for (std::size_t k = 0; k < d; ++k) c[k] = center[k] + spread * gauss(rng);
    classes.set_row(i, rfs::normalize(std::move(c)));
  }
  return classes;
}

rfs::Vec random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  rfs::Vec h(d);
  for (double& c : h) c = gauss(rng);
  return rfs::normalize(std::move(h));
}

int cmd_bench_kernel_mse(const Config& cfg) {
  CsvWriter writer(cfg.out_path);
  auto& out = writer.stream();
  write_metadata(out, "bench-kernel-mse", cfg);
  out << "method,D,mse,seed\n";
  const std::size_t num_pairs = 200;
  const double tau_kernel = cfg.nu();
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed + t;
    std::mt19937_64 rng(seed);
    const auto pairs = random_unit_pairs(num_pairs, cfg.d, rng);
    const rfs::QuadraticMap quad(cfg.d, cfg.alpha);
    const rfs::RffMap rff(cfg.d, cfg.num_rff, tau_kernel, seed);
    const rfs::MaclaurinMap maclaurin(cfg.d, 2 * cfg.num_rff, tau_kernel, seed);
    out << "quadratic," << cfg.num_rff << ',' << rfs::kernel_mse(quad, pairs, tau_kernel) << ','
        << seed << '\n';
    out << "rff," << cfg.num_rff << ',' << rfs::kernel_mse(rff, pairs, tau_kernel) << ',' << seed
        << '\n';
    out << "maclaurin," << cfg.num_rff << ',' << rfs::kernel_mse(maclaurin, pairs, tau_kernel)
        << ',' << seed << '\n';
  }
  return 0;
}

int cmd_bench_walltime(const Config& cfg) {
  const rfs::Scheme scheme = rfs::parse_scheme(cfg.scheme);
  std::mt19937_64 rng(cfg.seed);
  rfs::ClassMatrix classes(cfg.n, cfg.d);
  for (std::size_t i = 0; i < cfg.n; ++i) classes.set_row(i, random_unit(cfg.d, rng));

  // Refuse before timing if the tree would not fit.
  std::unique_ptr<rfs::FeatureMap> map;
  if (scheme == rfs::Scheme::rff) {
    map = std::make_unique<rfs::RffMap>(cfg.d, cfg.num_rff, cfg.nu(), cfg.seed);
  } else if (scheme == rfs::Scheme::quadratic) {
    map = std::make_unique<rfs::QuadraticMap>(cfg.d, cfg.alpha);
  }
  std::unique_ptr<rfs::SamplerTree> tree;
  if (map) {
    const double bytes =
        16.0 * static_cast<double>(std::bit_ceil(cfg.n)) * static_cast<double>(map->feature_dim());
    if (bytes > 4e9) throw std::runtime_error("sum-tree would exceed the 4 GB memory budget");
    tree = std::make_unique<rfs::SamplerTree>(classes, *map);
  }

  const std::size_t samples = std::max<std::size_t>(cfg.trials, 100);
  std::vector<double> micros;
  micros.reserve(samples);
  const double tau = cfg.tau();
  for (std::size_t s = 0; s < samples; ++s) {
    const rfs::Vec h = random_unit(cfg.d, rng);
    const auto start = std::chrono::steady_clock::now();
    rfs::SampledBatch batch;
    double target_logit = 0.0;
    rfs::Vec sample_logits;
    const std::size_t target = s % cfg.n;
    if (scheme == rfs::Scheme::exp_softmax || scheme == rfs::Scheme::full) {
      rfs::Vec logits(cfg.n);
      for (std::size_t i = 0; i < cfg.n; ++i) logits[i] = tau * rfs::dot(h, classes.row(i));
      const rfs::SoftmaxState state = rfs::softmax_state_from_logits(std::move(logits), target, tau);
      if (scheme == rfs::Scheme::full) {
        volatile double sink = rfs::full_loss(state);
        (void)sink;
        micros.push_back(std::chrono::duration<double, std::micro>(
                             std::chrono::steady_clock::now() - start)
                             .count());
        continue;
      }
      batch = rfs::ExpSampler(state).sample_negatives(target, cfg.m, rng);
    } else if (scheme == rfs::Scheme::uniform) {
      batch = rfs::UniformSampler(cfg.n).sample_negatives(target, cfg.m, rng);
    } else if (scheme == rfs::Scheme::log_uniform) {
      batch = rfs::LogUniformSampler(cfg.n).sample_negatives(target, cfg.m, rng);
    } else {
      batch = rfs::KernelSampler(*tree, map->apply(h), scheme).sample_negatives(target, cfg.m, rng);
    }
    sample_logits.resize(batch.m);
    for (std::size_t i = 0; i < batch.m; ++i) {
      sample_logits[i] = tau * rfs::dot(h, classes.row(batch.samples[i]));
    }
    target_logit = tau * rfs::dot(h, classes.row(target));
    volatile double sink =
        rfs::sampled_loss(rfs::adjust_logits_gathered(batch, target_logit, sample_logits));
    (void)sink;
    micros.push_back(
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start)
            .count());
  }

  // Drop the first 10% as warmup; report mean and p50 of the rest.
  const std::size_t skip = micros.size() / 10;
  std::vector<double> kept(micros.begin() + static_cast<std::ptrdiff_t>(skip), micros.end());
  const double mean = std::accumulate(kept.begin(), kept.end(), 0.0) / kept.size();
  std::nth_element(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(kept.size() / 2),
                   kept.end());
  const double p50 = kept[kept.size() / 2];

  CsvWriter writer(cfg.out_path);
  auto& out = writer.stream();
  write_metadata(out, "bench-walltime", cfg);
  out << "scheme,n,D,samples,mean_us,p50_us\n";
  out << cfg.scheme << ',' << cfg.n << ',' << cfg.num_rff << ',' << kept.size() << ',' << mean
      << ',' << p50 << '\n';
  return 0;
}

int cmd_bias_report(const Config& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const double tau = cfg.tau();
  const rfs::Vec h = random_unit(cfg.d, rng);
  const rfs::ClassMatrix classes = clustered_classes(cfg.n, cfg.d, h, 1.0, rng);
  const std::size_t target = 0;
  const rfs::SoftmaxState state = rfs::compute_softmax_state(h, classes, tau, target);
  const rfs::LogitGradTable grads = rfs::linear_logit_grads(h, classes, tau);

  const rfs::RffMap rff_map(cfg.d, cfg.num_rff, cfg.nu(), cfg.seed);
  const rfs::QuadraticMap quad_map(cfg.d, cfg.alpha);
  const rfs::SamplerTree rff_tree(classes, rff_map);
  const rfs::SamplerTree quad_tree(classes, quad_map);

  auto q_for = [&](rfs::Scheme scheme) -> rfs::Vec {
    switch (scheme) {
      case rfs::Scheme::uniform: return rfs::UniformSampler(cfg.n).negative_distribution(target);
      case rfs::Scheme::log_uniform:
        return rfs::LogUniformSampler(cfg.n).negative_distribution(target);
      case rfs::Scheme::exp_softmax: return rfs::ExpSampler(state).negative_distribution(target);
      case rfs::Scheme::quadratic:
        return rfs::KernelSampler(quad_tree, quad_map.apply(h), scheme)
            .negative_distribution(target);
      default:
        return rfs::KernelSampler(rff_tree, rff_map.apply(h), scheme)
            .negative_distribution(target);
    }
  };

  CsvWriter writer(cfg.out_path);
  auto& out = writer.stream();
  write_metadata(out, "bias-report", cfg);
  out << "scheme,m,trials,bias_l2,stderr_l2,lb_term,ub1,ub2,sum_sq_ratio,max_ratio_gap,"
         "max_partition_gap\n";
  for (rfs::Scheme scheme : {rfs::Scheme::uniform, rfs::Scheme::log_uniform,
                             rfs::Scheme::exp_softmax, rfs::Scheme::quadratic, rfs::Scheme::rff}) {
    const rfs::Vec q = q_for(scheme);
    std::mt19937_64 trial_rng(cfg.seed + 1 + static_cast<std::uint64_t>(scheme));
    const rfs::BiasReport report =
        rfs::mc_bias_report(state, q, grads, cfg.m, cfg.trials, trial_rng, scheme);
    const double max_gap =
        *std::max_element(report.bounds.partition_gap.begin(), report.bounds.partition_gap.end());
    out << rfs::scheme_name(scheme) << ',' << cfg.m << ',' << cfg.trials << ',' << report.bias_l2
        << ',' << report.stderr_l2 << ',' << report.bounds.lb_term << ',' << report.bounds.ub1
        << ',' << report.bounds.ub2 << ',' << report.bounds.sum_sq_ratio << ','
        << report.bounds.max_ratio_gap << ',' << max_gap << '\n';
  }
  return 0;
}

int cmd_train(const Config& cfg) {
  rfs::SparseDataset dataset;
  if (cfg.synthetic) {
    const std::size_t num_examples = std::min<std::size_t>(50 * cfg.n, 20000);
    dataset = rfs::make_synthetic_dataset(cfg.n, cfg.v, num_examples, cfg.seed);
  } else if (!cfg.data_path.empty()) {
    dataset = rfs::load_dataset(cfg.data_path);
  } else {
    throw CLI::ValidationError("train", "need --data PATH or --synthetic");
  }

  rfs::Model model = rfs::Model::random_init(dataset.num_features, cfg.d, dataset.num_labels,
                                             cfg.tau(), cfg.seed);
  rfs::TrainConfig train_cfg;
  train_cfg.scheme = rfs::parse_scheme(cfg.scheme);
  train_cfg.m = cfg.m;
  train_cfg.lr = cfg.lr;
  train_cfg.rff_frequencies = cfg.num_rff;
  train_cfg.nu = cfg.nu();
  train_cfg.quadratic_alpha = cfg.alpha;
  train_cfg.map_seed = cfg.seed;
  rfs::Trainer trainer(model, train_cfg);

  CsvWriter writer(cfg.out_path);
  auto& out = writer.stream();
  write_metadata(out, "train", cfg);
  out << "epoch,scheme,mean_sampled_loss,probe_full_loss,prec_at_1,prec_at_3,prec_at_5,"
         "wall_time_s\n";
  std::mt19937_64 rng(cfg.seed + 1);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const rfs::EpochStats stats = trainer.train_epoch(dataset, rng);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << epoch << ',' << cfg.scheme << ',' << stats.mean_sampled_loss << ','
        << stats.probe_full_loss << ',' << rfs::precision_at_k(model, dataset, 1) << ','
        << rfs::precision_at_k(model, dataset, std::min<std::size_t>(3, dataset.num_labels)) << ','
        << rfs::precision_at_k(model, dataset, std::min<std::size_t>(5, dataset.num_labels)) << ','
        << secs << '\n';
  }
  return 0;
}

int cmd_ratio_check(const Config& cfg) {
  CsvWriter writer(cfg.out_path);
  auto& out = writer.stream();
  write_metadata(out, "ratio-check", cfg);
  out << "D,nu,max_abs_dev,mean_abs_dev,frac_in_band,envelope_correlation,seed\n";
  const double tau = cfg.tau();
  const double nu = cfg.nu();
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed + t;
    std::mt19937_64 rng(seed);
    const rfs::Vec h = random_unit(cfg.d, rng);
    const rfs::ClassMatrix classes = clustered_classes(cfg.n, cfg.d, h, 0.5, rng);
    const rfs::SoftmaxState state = rfs::compute_softmax_state(h, classes, tau, 0);
    const rfs::RffMap map(cfg.d, cfg.num_rff, nu, seed);
    const rfs::SamplerTree tree(classes, map);
    const rfs::Vec q =
        rfs::KernelSampler(tree, map.apply(h), rfs::Scheme::rff).negative_distribution(0);
    const rfs::RatioCheck check = rfs::ratio_check(state, q, nu);
    out << cfg.num_rff << ',' << nu << ',' << check.max_abs_dev << ',' << check.mean_abs_dev << ','
        << check.frac_in_band << ',' << check.envelope_correlation << ',' << seed << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled softmax with kernel-based negative sampling: experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();

  Config cfg;
  app.add_option("--scheme", cfg.scheme, "uniform|loguniform|exp|quadratic|rff|full");
  app.add_option("--n", cfg.n, "number of classes")->check(CLI::PositiveNumber);
  app.add_option("--d", cfg.d, "embedding dimension")->check(CLI::PositiveNumber);
  app.add_option("--v", cfg.v, "input feature dimension")->check(CLI::PositiveNumber);
  app.add_option("--num-rff", cfg.num_rff, "RFF frequency count D")->check(CLI::PositiveNumber);
  app.add_option("--m", cfg.m, "negatives per step")->check(CLI::PositiveNumber);
  app.add_option("--softmax-temp", cfg.softmax_temp, "softmax temperature (tau = 1/temp^2)")
      ->check(CLI::PositiveNumber);
  app.add_option("--rff-temp", cfg.rff_temp, "RFF kernel temperature T (nu = 1/T^2)")
      ->check(CLI::PositiveNumber);
  app.add_option("--alpha", cfg.alpha, "quadratic kernel scale")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "RNG seed");
  app.add_option("--epochs", cfg.epochs, "training epochs");
  app.add_option("--lr", cfg.lr, "learning rate");
  app.add_option("--trials", cfg.trials, "MC trials / timing samples / seeds per row")
      ->check(CLI::PositiveNumber);
  app.add_option("--data", cfg.data_path, "sparse dataset path");
  app.add_flag("--synthetic", cfg.synthetic, "generate a synthetic dataset");
  app.add_option("--out", cfg.out_path, "output CSV path (default stdout)");

  auto* mse_cmd = app.add_subcommand("bench-kernel-mse", "kernel approximation MSE per method");
  auto* wall_cmd = app.add_subcommand("bench-walltime", "per-sample loss wall time for a scheme");
  auto* bias_cmd = app.add_subcommand("bias-report", "gradient bias and bound terms per scheme");
  auto* train_cmd = app.add_subcommand("train", "desk-scale training run");
  auto* ratio_cmd = app.add_subcommand("ratio-check", "normalized sampling ratios vs envelope");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    rfs::parse_scheme(cfg.scheme);  // config validation up front
    if (mse_cmd->parsed()) return cmd_bench_kernel_mse(cfg);
    if (wall_cmd->parsed()) return cmd_bench_walltime(cfg);
    if (bias_cmd->parsed()) return cmd_bias_report(cfg);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (ratio_cmd->parsed()) return cmd_ratio_check(cfg);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
