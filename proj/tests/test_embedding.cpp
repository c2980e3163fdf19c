#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "rfs/embedding.hpp"
#include "test_util.hpp"

using namespace rfs;
using rfs::testutil::random_classes;
using rfs::testutil::random_unit_vec;

namespace {

// Central finite differences of full_loss over the flat [h | c_1..c_n]
// parameter vector, independent of the analytic gradient path.
Vec fd_full_loss_gradient(const Vec& h, const ClassMatrix& classes, double tau, std::size_t t,
                          double step = 1e-6) {
  const std::size_t d = classes.d;
  Vec theta(h);
  theta.insert(theta.end(), classes.data.begin(), classes.data.end());
  auto loss_at = [&](const Vec& params) {
    Vec logits(classes.n);
    for (std::size_t i = 0; i < classes.n; ++i) {
      double o = 0.0;
      for (std::size_t k = 0; k < d; ++k) o += params[k] * params[d + i * d + k];
      logits[i] = tau * o;
    }
    return full_loss(softmax_state_from_logits(std::move(logits), t, tau));
  };
  Vec grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    Vec plus = theta, minus = theta;
    plus[k] += step;
    minus[k] -= step;
    grad[k] = (loss_at(plus) - loss_at(minus)) / (2.0 * step);
  }
  return grad;
}

}  // namespace

TEST_CASE("normalize scales to unit norm") {
  const Vec v = normalize(Vec{3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
  const Vec id = normalize(Vec{1.0, 0.0});
  CHECK(id[0] == 1.0);
  CHECK(id[1] == 0.0);
  CHECK_THROWS_WITH_AS(normalize(Vec{0.0, 0.0}), "degenerate embedding", std::invalid_argument);
}

TEST_CASE("softmax state on symmetric and hand instances") {
  const SoftmaxState sym = softmax_state_from_logits({0.0, 0.0}, 1);
  CHECK(sym.probs[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sym.partition == doctest::Approx(2.0).epsilon(1e-14));

  const SoftmaxState s3 = softmax_state_from_logits({1.0, 0.0, 0.0}, 0);
  const double e = std::exp(1.0);
  CHECK(s3.probs[0] == doctest::Approx(e / (e + 2.0)).epsilon(1e-14));
  CHECK(s3.probs[1] == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-14));

  CHECK_THROWS_AS(softmax_state_from_logits({0.0, 0.0}, 2), std::out_of_range);
}

TEST_CASE("softmax state recomputation oracle at high tau") {
  std::mt19937_64 rng(7);
  const double tau = 11.11;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rep % 7;
    const std::size_t d = 4 + rep % 5;
    const Vec h = random_unit_vec(d, rng);
    const ClassMatrix classes = random_classes(n, d, rng);
    const SoftmaxState state = compute_softmax_state(h, classes, tau, rep % n);
    double prob_sum = 0.0, exp_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(state.logits[i] == doctest::Approx(tau * dot(h, classes.row(i))).epsilon(1e-12));
      prob_sum += state.probs[i];
      exp_sum += std::exp(state.logits[i]);
    }
    CHECK(prob_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(state.partition == doctest::Approx(exp_sum).epsilon(1e-10));
  }
}

TEST_CASE("full loss") {
  CHECK(full_loss(softmax_state_from_logits({0.0, 0.0}, 0)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(full_loss(softmax_state_from_logits({5.0, 0.0, 0.0}, 0)) ==
        doctest::Approx(-5.0 + std::log(std::exp(5.0) + 2.0)).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vec logits(4);
    for (double& o : logits) o = gauss(rng);
    const SoftmaxState state = softmax_state_from_logits(logits, rep % 4);
    CHECK(full_loss(state) ==
          doctest::Approx(-std::log(state.probs[state.target])).epsilon(1e-12));
  }
}

TEST_CASE("full gradient reduces correctly on two classes") {
  const SoftmaxState state = softmax_state_from_logits({0.0, 0.0}, 0);
  LogitGradTable grads(2, 3);
  const Vec g1{1.0, 2.0, 3.0}, g2{-1.0, 0.5, 4.0};
  for (std::size_t k = 0; k < 3; ++k) {
    grads.row(0)[k] = g1[k];
    grads.row(1)[k] = g2[k];
  }
  const Vec grad = full_gradient(state, grads);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(grad[k] == doctest::Approx(0.5 * (g2[k] - g1[k])).epsilon(1e-12));
  }
}

TEST_CASE("full gradient vanishes when the target dominates") {
  const SoftmaxState state = softmax_state_from_logits({60.0, 0.0, 0.0}, 0);
  LogitGradTable grads(3, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& g : grads.data) g = gauss(rng);
  for (double g : full_gradient(state, grads)) CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("full gradient matches finite differences") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 3 + rep % 8;
    const std::size_t d = 2 + rep % 7;
    const std::size_t t = rep % n;
    const double tau = 1.0 + 0.5 * (rep % 3);
    const Vec h = random_unit_vec(d, rng);
    const ClassMatrix classes = random_classes(n, d, rng);
    const SoftmaxState state = compute_softmax_state(h, classes, tau, t);
    const Vec analytic = full_gradient(state, linear_logit_grads(h, classes, tau));
    const Vec fd = fd_full_loss_gradient(h, classes, tau, t);
    for (std::size_t k = 0; k < fd.size(); ++k) {
      CHECK(std::fabs(analytic[k] - fd[k]) < 1e-5);
    }
  }
}

TEST_CASE("exponential kernel equals scaled Gaussian kernel on the sphere") {
  std::mt19937_64 rng(31);
  const double tau = 11.11;
  for (int rep = 0; rep < 100; ++rep) {
    const Vec h = random_unit_vec(6, rng);
    const Vec c = random_unit_vec(6, rng);
    Vec delta(6);
    for (std::size_t k = 0; k < 6; ++k) delta[k] = h[k] - c[k];
    const double lhs = std::exp(tau * dot(h, c));
    const double rhs = std::exp(tau) * std::exp(-tau * dot(delta, delta) / 2.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("softmax probabilities are shift invariant") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vec logits(6);
    for (double& o : logits) o = gauss(rng);
    Vec shifted = logits;
    for (double& o : shifted) o += 17.5;
    const SoftmaxState a = softmax_state_from_logits(logits, 0);
    const SoftmaxState b = softmax_state_from_logits(shifted, 0);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(a.probs[i] == doctest::Approx(b.probs[i]).epsilon(1e-12));
    }
  }
}
