#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "rfs/samplers.hpp"
#include "test_util.hpp"

using namespace rfs;
using rfs::testutil::random_classes;
using rfs::testutil::random_unit_vec;

TEST_CASE("scheme names round-trip") {
  for (Scheme s : {Scheme::uniform, Scheme::log_uniform, Scheme::exp_softmax, Scheme::quadratic,
                   Scheme::rff, Scheme::full}) {
    CHECK(parse_scheme(scheme_name(s)) == s);
  }
  CHECK(parse_scheme("loguniform") == Scheme::log_uniform);
  CHECK(parse_scheme("exp") == Scheme::exp_softmax);
  CHECK_THROWS_AS(parse_scheme("banana"), std::invalid_argument);
}

TEST_CASE("uniform sampler over n=4 excludes the target with q = 1/3") {
  UniformSampler sampler(4);
  std::mt19937_64 rng(1);
  const SampledBatch batch = sampler.sample_negatives(2, 5000, rng);
  CHECK(batch.target == 2);
  CHECK(batch.m == 5000);
  CHECK(batch.samples.size() == 5000);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t s = 0; s < batch.m; ++s) {
    CHECK(batch.samples[s] != 2);
    CHECK(batch.q_values[s] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    ++counts[batch.samples[s]];
  }
  const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 5000.0);
  for (std::size_t i : {0u, 1u, 3u}) {
    CHECK(std::fabs(counts[i] / 5000.0 - 1.0 / 3.0) < 4.0 * sigma);
  }
  const Vec law = sampler.negative_distribution(2);
  CHECK(law[2] == 0.0);
  CHECK(law[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("n=2 target exclusion is the forced point mass") {
  UniformSampler sampler(2);
  std::mt19937_64 rng(2);
  const SampledBatch batch = sampler.sample_negatives(0, 16, rng);
  for (std::size_t s = 0; s < batch.m; ++s) {
    CHECK(batch.samples[s] == 1);
    CHECK(batch.q_values[s] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("log-uniform probabilities telescope to one and match draws") {
  const std::size_t n = 50;
  LogUniformSampler sampler(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += sampler.probability(i);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Hand value: P(0) = log(2) / log(51).
  CHECK(sampler.probability(0) == doctest::Approx(std::log(2.0) / std::log(51.0)).epsilon(1e-12));

  std::mt19937_64 rng(3);
  const std::size_t draws = 400000;
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t s = 0; s < draws; ++s) {
    const std::size_t i = sampler.draw(rng);
    REQUIRE(i < n);
    ++counts[i];
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tv += std::fabs(counts[i] / static_cast<double>(draws) - sampler.probability(i));
  }
  CHECK(tv / 2.0 < 0.005);
}

TEST_CASE("exp sampler reproduces the softmax law and its q values") {
  std::mt19937_64 rng(4);
  const std::size_t n = 6, d = 4;
  const ClassMatrix classes = random_classes(n, d, rng);
  const Vec h = random_unit_vec(d, rng);
  const SoftmaxState state = compute_softmax_state(h, classes, 3.0, 1);
  ExpSampler sampler(state);

  for (std::size_t i = 0; i < n; ++i) {
    CHECK(sampler.probability(i) == doctest::Approx(state.probs[i]).epsilon(1e-12));
  }

  // Restricted law over N_t is e^{o_i} / Z_t.
  const Vec law = sampler.negative_distribution(1);
  const double z_t = state.partition - std::exp(state.tau * dot(h, classes.row(1)));
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 1) {
      CHECK(law[i] == 0.0);
    } else {
      const double expected = std::exp(state.tau * dot(h, classes.row(i))) / z_t;
      CHECK(law[i] == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  const SampledBatch batch = sampler.sample_negatives(1, 50000, rng);
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t s = 0; s < batch.m; ++s) {
    CHECK(batch.samples[s] != 1);
    CHECK(batch.q_values[s] == doctest::Approx(law[batch.samples[s]]).epsilon(1e-12));
    ++counts[batch.samples[s]];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 1) continue;
    const double sigma = std::sqrt(law[i] * (1.0 - law[i]) / batch.m);
    CHECK(std::fabs(counts[i] / static_cast<double>(batch.m) - law[i]) < 4.0 * sigma + 1e-9);
  }
}

TEST_CASE("kernel sampler frequencies match renormalized tree probabilities") {
  std::mt19937_64 rng(5);
  const std::size_t n = 12, d = 5;
  const ClassMatrix classes = random_classes(n, d, rng);
  const RffMap map(d, 256, 2.0, 77);
  const SamplerTree tree(classes, map);
  const Vec h = random_unit_vec(d, rng);
  KernelSampler sampler(tree, map.apply(h), Scheme::rff);

  const std::size_t target = 3;
  const Vec law = sampler.negative_distribution(target);
  CHECK(law[target] == 0.0);
  double total = 0.0;
  for (double q : law) total += q;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  const SampledBatch batch = sampler.sample_negatives(target, 200000, rng);
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t s = 0; s < batch.m; ++s) {
    CHECK(batch.q_values[s] == doctest::Approx(law[batch.samples[s]]).epsilon(1e-10));
    ++counts[batch.samples[s]];
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tv += std::fabs(counts[i] / static_cast<double>(batch.m) - law[i]);
  }
  CHECK(tv / 2.0 < 0.01);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  std::mt19937_64 rng_a(99), rng_b(99);
  LogUniformSampler sampler(1000);
  const SampledBatch a = sampler.sample_negatives(7, 200, rng_a);
  const SampledBatch b = sampler.sample_negatives(7, 200, rng_b);
  CHECK(a.samples == b.samples);
  CHECK(a.q_values == b.q_values);
}

TEST_CASE("a sampler that can only draw the target exhausts its rejection budget") {
  // Point mass on the target via a softmax with one overwhelming logit.
  SoftmaxState state = softmax_state_from_logits(Vec{800.0, 0.0, 0.0}, 0, 1.0);
  ExpSampler sampler(state);
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(sampler.sample_negatives(0, 4, rng), std::runtime_error);
}
