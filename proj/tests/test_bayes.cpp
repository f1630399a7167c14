#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nbsnn/bayes.hpp"
#include "nbsnn/model.hpp"
#include "oracles.hpp"

using namespace nbsnn;

using fixtures::log_normal_pdf;
using fixtures::rho_for;

TEST(SampleWeights, CollapsedPosteriorReturnsMean) {
  GaussianPosterior<double> q(5, 0.0, -INFINITY);
  for (std::size_t i = 0; i < 5; ++i) q.mu[i] = 0.3 * static_cast<double>(i) - 0.5;
  Rng rng(1);
  EXPECT_EQ(sample_weights(q, rng).w, q.mu);
}

TEST(SampleWeights, UnitGaussianMoments) {
  GaussianPosterior<double> q(100000, 0.0, rho_for(1.0));
  ASSERT_NEAR(q.sigma(0), 1.0, 1e-12);
  Rng rng(2);
  const auto s = sample_weights(q, rng);
  double m = 0, v = 0;
  for (double w : s.w) m += w;
  m /= static_cast<double>(s.w.size());
  for (double w : s.w) v += (w - m) * (w - m);
  v /= static_cast<double>(s.w.size() - 1);
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(v, 1.0, 0.05);
}

TEST(SampleWeights, SeedDeterminism) {
  GaussianPosterior<float> q(64, 0.1f, -2.0f);
  Rng a(9), b(9);
  EXPECT_EQ(sample_weights(q, a).w, sample_weights(q, b).w);
}

TEST(Kl, ClosedFormExamples) {
  GaussianPrior prior{0.0, 1.0};
  GaussianPosterior<double> same(3, 0.0, rho_for(1.0));
  EXPECT_NEAR(kl_gaussian(same, prior), 0.0, 1e-12);
  GaussianPosterior<double> shifted(1, 1.0, rho_for(1.0));
  EXPECT_NEAR(kl_gaussian(shifted, prior), 0.5, 1e-12);
}

TEST(Kl, MatchesMonteCarloWithinOnePercent) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianPrior prior{rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5)};
    GaussianPosterior<double> q(4, 0.0, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q.mu[i] = rng.uniform(-1.5, 1.5);
      q.rho[i] = rho_for(rng.uniform(0.3, 2.5));
    }
    double mc = 0.0;
    const int draws = 1000000;
    Rng mc_rng(1000 + static_cast<std::uint64_t>(trial));
    for (int d = 0; d < draws; ++d) {
      double lr = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double x = q.mu[i] + q.sigma(i) * mc_rng.normal();
        lr += log_normal_pdf(x, q.mu[i], q.sigma(i)) - log_normal_pdf(x, prior.mu, prior.sigma);
      }
      mc += lr;
    }
    mc /= draws;
    const double kl = kl_gaussian(q, prior);
    EXPECT_NEAR(mc, kl, 0.01 * kl) << "trial " << trial;
  }
}

TEST(Kl, NonNegativeAndZeroOnlyAtPrior) {
  Rng rng(4);
  const GaussianPrior prior{0.0, 1.0};
  for (int trial = 0; trial < 200; ++trial) {
    GaussianPosterior<double> q(8, 0.0, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q.mu[i] = rng.uniform(-2, 2);
      q.rho[i] = rng.uniform(-6, 3);
    }
    EXPECT_GT(kl_gaussian(q, prior), 0.0);
  }
}

TEST(Kl, GradientMatchesClosedFormAndFiniteDifference) {
  const GaussianPrior prior{0.2, 0.7};
  GaussianPosterior<double> q(3, 0.0, 0.0);
  q.mu = {0.5, -1.0, 0.0};
  q.rho = {-1.0, 0.3, -4.0};
  std::vector<double> gmu(3, 0.0), grho(3, 0.0);
  kl_gradient(q, prior, 1.0, std::span<double>(gmu), std::span<double>(grho));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(gmu[i], (q.mu[i] - prior.mu) / (prior.sigma * prior.sigma), 1e-12);
    auto p = q;
    const double h = 1e-6;
    p.rho[i] += h;
    const double up = kl_gaussian(p, prior);
    p.rho[i] -= 2 * h;
    const double down = kl_gaussian(p, prior);
    EXPECT_NEAR(grho[i], (up - down) / (2 * h), 1e-6);
  }
}

TEST(Elbo, Arithmetic) {
  EXPECT_EQ(elbo_loss(1.3, 50.0, 0.0, 7), 1.3);
  EXPECT_DOUBLE_EQ(elbo_loss(1.0, 10.0, 1.0, 10), 2.0);
  const double base = elbo_loss(1.0, 10.0, 0.0, 4);
  EXPECT_DOUBLE_EQ(elbo_loss(1.0, 10.0, 2.0, 4) - base, 2.0 * (elbo_loss(1.0, 10.0, 1.0, 4) - base));
  EXPECT_THROW(elbo_loss(1.0, 1.0, -1.0, 1), Error);
  EXPECT_THROW(elbo_loss(1.0, 1.0, 1.0, 0), Error);
}

TEST(Predictive, UniformCountsGiveMaxEntropy) {
  const auto p = aggregate_predictive({{7, 7, 7, 7, 7, 7}, {0, 0, 0, 0, 0, 0}}, 50, 1.0);
  for (double m : p.mean_probs) EXPECT_NEAR(m, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p.entropy, std::log(6.0), 1e-12);
}

TEST(Predictive, HandAverageOfThreeSoftmaxVectors) {
  const std::vector<std::array<int, 6>> counts = {{10, 0, 0, 0, 0, 0}, {0, 10, 0, 0, 0, 0}, {10, 10, 0, 0, 0, 0}};
  const auto p = aggregate_predictive(counts, 10, 1.0);
  // logits are counts / 10: {1,0,...}, {0,1,...}, {1,1,0,...}
  const double e = std::numbers::e;
  const double a = e / (e + 5), b = 1 / (e + 5), c = e / (2 * e + 4), d = 1 / (2 * e + 4);
  EXPECT_NEAR(p.mean_probs[0], (a + b + c) / 3, 1e-12);
  EXPECT_NEAR(p.mean_probs[1], (b + a + c) / 3, 1e-12);
  EXPECT_NEAR(p.mean_probs[2], (b + b + d) / 3, 1e-12);
  double s = 0;
  for (double m : p.mean_probs) s += m;
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_EQ(p.label, 1);  // tie between 1 and 2 resolves to the first
}

TEST(Predictive, PermutationInvariantAndBounded) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::array<int, 6>> counts(7);
    for (auto& c : counts)
      for (auto& v : c) v = static_cast<int>(rng.below(51));
    const auto a = aggregate_predictive(counts, 50, 3.0);
    rng.shuffle(counts.begin(), counts.end());
    const auto b = aggregate_predictive(counts, 50, 3.0);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.mean_probs, b.mean_probs);
    EXPECT_GE(a.entropy, 0.0);
    EXPECT_LE(a.entropy, std::log(6.0) + 1e-12);
  }
}

TEST(Predict, CollapsedSingleSampleEqualsDeterministicForward) {
  NetworkConfig c;
  c.time_steps = 25;
  auto params = NetworkParams<float>::init(c, 3, -5.0);
  for (auto& r : params.out_w.rho) r = -INFINITY;
  for (auto& r : params.out_b.rho) r = -INFINITY;
  Model m{Network<float>(c, params), {}, {}, 1.0};
  FeatureGrid g;
  Rng rng(8);
  for (auto& v : g.values) v = rng.uniform();
  const auto x = rate_encode(g, c.time_steps, rng);
  Rng prng(1);
  const auto p = predict(x, m, 1, prng);
  const auto det = m.net.forward(x, m.net.params().out_w.mu, m.net.params().out_b.mu);
  ASSERT_EQ(p.sample_counts.size(), 1u);
  EXPECT_EQ(p.sample_counts[0], to_int_counts(det.counts));
  EXPECT_EQ(p.mean_probs, count_probabilities(det.counts, c.time_steps, 1.0));
}
