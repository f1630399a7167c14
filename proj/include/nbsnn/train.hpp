#pragma once

// Minibatch Bayes-by-backprop training of the spiking classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nbsnn/adam.hpp"
#include "nbsnn/bayes.hpp"
#include "nbsnn/dataset.hpp"
#include "nbsnn/encoding.hpp"
#include "nbsnn/model.hpp"
#include "nbsnn/network.hpp"

namespace nbsnn {

struct TrainConfig {
  int epochs = 50;
  int minibatch = 32;
  AdamConfig adam;
  double kl_beta = 1.0;
  std::uint64_t seed = 42;
  NetworkConfig network;
  GaussianPrior prior;
  double logit_scale = 1.0;
  double rho_init = -5.0;
  int threads = 1;  // execution only; results do not depend on it

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (minibatch < 1) throw ConfigError("train: minibatch must be >= 1");
    if (!(adam.lr >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
    if (!(kl_beta >= 0.0)) throw ConfigError("train: KL beta must be >= 0");
    if (!(prior.sigma > 0.0)) throw ConfigError("train: prior sigma must be > 0");
    if (!(logit_scale > 0.0)) throw ConfigError("train: logit scale must be > 0");
    network.validate();
  }
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;       // per-sample negative ELBO: mean CE + beta * KL / N
  double train_acc = 0.0;  // percent, from the training-time forward passes
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> curve;
};

// Runs fn(i, worker) for i in [0, n) over `threads` workers. Each index is
// handled by exactly one worker; callers keep per-index outputs so the
// reduction order stays fixed.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t used = std::min(workers, n);
  for (std::size_t w = 0; w < used; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += used) fn(i, w);
    });
}

// Forward + backward for one sample under a fixed output-layer draw.
// Accumulates into `grad` (deterministic tensors and output mu/rho) and
// returns the cross-entropy. `predicted` receives argmax of the counts.
template <class S>
double sample_gradient(const Network<S>& net, const SpikeTrain& x, int label,
                       const OutputSample<S>& draw, double tau, SpikeMode mode, Trace<S>& tr,
                       NetworkParams<S>& grad, int* predicted = nullptr) {
  const auto fr = net.forward(x, draw.w.w, draw.b.w, mode, tr);
  std::vector<S> d_counts(kClasses);
  const double ce = count_cross_entropy<S>(fr.counts, label, x.steps(), tau, d_counts);
  if (predicted) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kClasses; ++k)
      if (fr.counts[k] > fr.counts[best]) best = k;
    *predicted = static_cast<int>(best) + 1;
  }
  std::vector<S> d_w(draw.w.w.size(), S(0)), d_b(draw.b.w.size(), S(0));
  net.backward(tr, d_counts, draw.w.w, grad, d_w, d_b);
  const auto& p = net.params();
  posterior_grad<S>(p.out_w, draw.w, d_w, grad.out_w.mu, grad.out_w.rho);
  posterior_grad<S>(p.out_b, draw.b, d_b, grad.out_b.mu, grad.out_b.rho);
  return ce;
}

inline double total_kl(const NetworkParams<float>& p, const GaussianPrior& prior) {
  return kl_gaussian(p.out_w, prior) + kl_gaussian(p.out_b, prior);
}

template <class S>
void add_into(NetworkParams<S>& acc, const NetworkParams<S>& g) {
  std::vector<const std::vector<S>*> src;
  g.for_each_tensor([&src](std::string_view, const std::vector<S>& v) { src.push_back(&v); });
  std::size_t k = 0;
  acc.for_each_tensor([&](std::string_view, std::vector<S>& v) {
    const auto& s = *src[k++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += s[i];
  });
}

template <class S>
void zero_fill(NetworkParams<S>& p) {
  p.for_each_tensor([](std::string_view, std::vector<S>& v) { std::fill(v.begin(), v.end(), S(0)); });
}

template <class S>
bool all_finite(const NetworkParams<S>& p) {
  bool ok = true;
  p.for_each_tensor([&ok](std::string_view, const std::vector<S>& v) {
    for (auto x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Each epoch shuffles by (seed, epoch), encodes every sample with a seed
// derived from (seed, epoch, sample index), draws one output-layer sample
// per minibatch and takes one Adam step per minibatch.
inline TrainResult train(const TrainConfig& cfg, std::span<const GasSample> samples,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (samples.empty()) throw Error("train: empty training set");

  Model model{Network<float>(cfg.network, NetworkParams<float>::init(cfg.network, cfg.seed, cfg.rho_init)),
              fit_stats(samples), cfg.prior, cfg.logit_scale};

  std::vector<FeatureGrid> grids;
  grids.reserve(samples.size());
  for (const auto& s : samples) grids.push_back(scale(s, model.stats));

  const std::size_t n = samples.size();
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  const std::size_t n_batches = (n + mb - 1) / mb;
  const int T = cfg.network.time_steps;

  Adam adam(cfg.adam);
  const auto zeros = NetworkParams<float>::zeros(cfg.network);
  std::vector<NetworkParams<float>> per_sample(mb, zeros);
  const auto workers = static_cast<std::size_t>(std::max(1, cfg.threads));
  std::vector<Trace<float>> traces(workers);
  std::vector<double> ce(mb);
  std::vector<int> hit(mb);
  NetworkParams<float> grad = zeros;

  std::vector<std::size_t> order(n);
  TrainResult result{std::move(model), {}};
  auto& m = result.model;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, Stream::shuffle, {static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * mb, hi = std::min(n, lo + mb), count = hi - lo;
      Rng weight_rng(derive_seed(cfg.seed, Stream::weights, {static_cast<std::uint64_t>(epoch), b}));
      const auto draw = sample_output(m.net.params(), weight_rng);

      parallel_for(count, cfg.threads, [&](std::size_t j, std::size_t w) {
        const std::size_t idx = order[lo + j];
        zero_fill(per_sample[j]);
        const auto x = rate_encode(grids[idx], T,
                                   derive_seed(cfg.seed, Stream::encode,
                                               {static_cast<std::uint64_t>(epoch), idx}));
        int pred = 0;
        ce[j] = sample_gradient<float>(m.net, x, samples[idx].label, draw, cfg.logit_scale,
                                       SpikeMode::hard, traces[w], per_sample[j], &pred);
        hit[j] = pred == samples[idx].label ? 1 : 0;
      });

      zero_fill(grad);
      double ce_sum = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        add_into(grad, per_sample[j]);
        ce_sum += ce[j];
        correct += static_cast<std::size_t>(hit[j]);
      }
      const double kl = total_kl(m.net.params(), cfg.prior);
      const double loss = elbo_loss(ce_sum, kl, cfg.kl_beta, static_cast<int>(n_batches));
      if (!std::isfinite(loss) || !all_finite(grad))
        throw NumericError("train: non-finite loss or gradient at epoch " + std::to_string(epoch + 1) +
                           ", minibatch " + std::to_string(b + 1));
      const double kl_scale = cfg.kl_beta / static_cast<double>(n_batches);
      kl_gradient(m.net.params().out_w, cfg.prior, kl_scale, std::span<float>(grad.out_w.mu),
                  std::span<float>(grad.out_w.rho));
      kl_gradient(m.net.params().out_b, cfg.prior, kl_scale, std::span<float>(grad.out_b.mu),
                  std::span<float>(grad.out_b.rho));
      adam.step(m.net.params(), grad);
      loss_sum += loss;
    }
    EpochStats st{epoch + 1, loss_sum / static_cast<double>(n),
                  100.0 * static_cast<double>(correct) / static_cast<double>(n)};
    result.curve.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return result;
}

}  // namespace nbsnn
