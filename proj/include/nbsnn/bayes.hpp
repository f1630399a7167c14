#pragma once

// Factorized Gaussian posterior over weights (Bayes by backprop):
// reparameterized sampling, closed-form KL to a N(mu_p, sigma_p^2) prior,
// the ELBO objective, and Monte Carlo predictive aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nbsnn/dataset.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/rng.hpp"

namespace nbsnn {

template <class S>
S softplus(S x) {
  if (x > S(30)) return x;
  return std::log1p(std::exp(x));
}

template <class S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

struct GaussianPrior {
  double mu = 0.0;
  double sigma = 1.0;
  friend bool operator==(const GaussianPrior&, const GaussianPrior&) = default;
};

// sigma = softplus(rho) > 0 by construction.
template <class S>
struct GaussianPosterior {
  std::vector<S> mu;
  std::vector<S> rho;

  GaussianPosterior() = default;
  GaussianPosterior(std::size_t n, S mu0, S rho0) : mu(n, mu0), rho(n, rho0) {}

  std::size_t size() const noexcept { return mu.size(); }
  S sigma(std::size_t i) const { return softplus(rho[i]); }
};

template <class S>
struct WeightSample {
  std::vector<S> w;
  std::vector<S> eps;  // kept for the reparameterization gradient
};

// w = mu + softplus(rho) * eps, eps ~ N(0, 1).
template <class S>
WeightSample<S> sample_weights(const GaussianPosterior<S>& q, Rng& rng) {
  if (q.mu.size() != q.rho.size()) throw ShapeError("sample_weights: mu/rho size mismatch");
  WeightSample<S> out;
  out.w.resize(q.size());
  out.eps.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const S e = static_cast<S>(rng.normal());
    out.eps[i] = e;
    out.w[i] = q.mu[i] + q.sigma(i) * e;
  }
  return out;
}

// Posterior means with zero noise; used when sampling is disabled.
template <class S>
WeightSample<S> mean_weights(const GaussianPosterior<S>& q) {
  return {q.mu, std::vector<S>(q.size(), S(0))};
}

// Sum over weights of KL(N(mu, sigma^2) || N(mu_p, sigma_p^2)).
template <class S>
double kl_gaussian(const GaussianPosterior<S>& q, const GaussianPrior& prior) {
  if (!(prior.sigma > 0.0)) throw Error("kl_gaussian: prior sigma must be > 0");
  const double var_p = prior.sigma * prior.sigma;
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double sq = static_cast<double>(q.sigma(i));
    const double dm = static_cast<double>(q.mu[i]) - prior.mu;
    kl += std::log(prior.sigma / sq) + (sq * sq + dm * dm) / (2.0 * var_p) - 0.5;
  }
  return kl;
}

// Adds scale * dKL/dmu and scale * dKL/drho into the gradient buffers.
template <class S>
void kl_gradient(const GaussianPosterior<S>& q, const GaussianPrior& prior, double scale,
                 std::span<S> grad_mu, std::span<S> grad_rho) {
  const double var_p = prior.sigma * prior.sigma;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double sq = static_cast<double>(q.sigma(i));
    const double dmu = (static_cast<double>(q.mu[i]) - prior.mu) / var_p;
    const double dsigma = -1.0 / sq + sq / var_p;
    grad_mu[i] += static_cast<S>(scale * dmu);
    grad_rho[i] += static_cast<S>(scale * dsigma * static_cast<double>(sigmoid(q.rho[i])));
  }
}

// Cross-entropy plus KL amortized over the minibatches of one epoch.
inline double elbo_loss(double cross_entropy, double kl, double beta, int n_minibatches) {
  if (n_minibatches < 1) throw Error("elbo_loss: n_minibatches must be >= 1");
  if (beta < 0.0) throw Error("elbo_loss: beta must be >= 0");
  return cross_entropy + beta * kl / static_cast<double>(n_minibatches);
}

using ClassProbs = std::array<double, kClasses>;

// softmax(counts / T * tau)
template <class Counts>
ClassProbs count_probabilities(const Counts& counts, int steps, double tau) {
  ClassProbs logits{};
  double mx = -INFINITY;
  for (std::size_t k = 0; k < kClasses; ++k) {
    logits[k] = static_cast<double>(counts[k]) / steps * tau;
    mx = std::max(mx, logits[k]);
  }
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - mx));
  for (auto& l : logits) l /= z;
  return logits;
}

inline double entropy(const ClassProbs& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::max(h, 0.0);
}

// First index of the maximum, as a 1-based label.
inline int argmax_label(const ClassProbs& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return static_cast<int>(best) + 1;
}

struct Predictive {
  ClassProbs mean_probs{};
  double entropy = 0.0;
  int label = 1;
  std::vector<std::array<int, kClasses>> sample_counts;  // S x 6
};

// Averages per-sample softmax vectors. Summation runs over classes in a fixed
// order per sample, then over samples sorted by count vector, so the result
// does not depend on the order the samples were drawn in.
inline Predictive aggregate_predictive(std::vector<std::array<int, kClasses>> counts, int steps,
                                       double tau) {
  if (counts.empty()) throw Error("predict: need at least one sample");
  Predictive p;
  p.sample_counts = counts;
  std::sort(counts.begin(), counts.end());
  for (const auto& c : counts) {
    const auto probs = count_probabilities(c, steps, tau);
    for (std::size_t k = 0; k < kClasses; ++k) p.mean_probs[k] += probs[k];
  }
  for (auto& m : p.mean_probs) m /= static_cast<double>(counts.size());
  p.entropy = entropy(p.mean_probs);
  p.label = argmax_label(p.mean_probs);
  return p;
}

}  // namespace nbsnn
