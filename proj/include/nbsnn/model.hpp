#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nbsnn/bayes.hpp"
#include "nbsnn/dataset.hpp"
#include "nbsnn/encoding.hpp"
#include "nbsnn/network.hpp"
#include "nbsnn/rng.hpp"

namespace nbsnn {

// A trained classifier: network weights, the normalization it was trained
// with, and the Bayesian readout settings.
struct Model {
  Network<float> net;
  NormalizationStats stats;
  GaussianPrior prior;
  double logit_scale = 1.0;

  int time_steps() const { return net.config().time_steps; }
};

template <class S>
std::array<int, kClasses> to_int_counts(const std::vector<S>& counts) {
  std::array<int, kClasses> out{};
  for (std::size_t k = 0; k < kClasses; ++k) out[k] = static_cast<int>(std::lround(counts[k]));
  return out;
}

// Monte Carlo predictive: S draws of the Bayesian output layer over one
// shared pass through the deterministic layers.
inline Predictive predict(const SpikeTrain& train, const Model& model, int samples, Rng& rng,
                          Activity* activity = nullptr) {
  if (samples < 1) throw Error("predict: samples must be >= 1");
  Trace<float> tr;
  model.net.forward_hidden(train, SpikeMode::hard, tr);
  std::vector<std::array<int, kClasses>> counts;
  counts.reserve(static_cast<std::size_t>(samples));
  Activity act{};
  for (int s = 0; s < samples; ++s) {
    const auto draw = sample_output(model.net.params(), rng);
    const auto c = model.net.forward_output(tr, draw.w.w, draw.b.w, SpikeMode::hard);
    counts.push_back(to_int_counts(c));
    const auto a = model.net.activity(tr);
    for (std::size_t l = 0; l < kActivityLayers; ++l) act[l] += a[l] / samples;
  }
  if (activity) *activity = act;
  return aggregate_predictive(std::move(counts), train.steps(), model.logit_scale);
}

// Scale, encode and predict one sample. Seeds for encoding and weight
// sampling both derive from `seed`.
inline Predictive predict_sample(const GasSample& sample, const Model& model, int samples,
                                 std::uint64_t seed, Activity* activity = nullptr) {
  const auto grid = scale(sample, model.stats);
  const auto train = rate_encode(grid, model.time_steps(), derive_seed(seed, Stream::encode));
  Rng rng(derive_seed(seed, Stream::predict));
  return predict(train, model, samples, rng, activity);
}

}  // namespace nbsnn
