#pragma once

// Leaky integrate-and-fire dynamics with subtractive reset:
//   V[t] = gamma * V[t-1] + I[t] - S[t-1] * v_thr
//   S[t] = V[t] > v_thr

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "nbsnn/error.hpp"

namespace nbsnn {

struct LifParams {
  double gamma = 0.9;             // e^(-1/RC)
  double v_thr = 1.0;
  double surrogate_slope = 25.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("lif: gamma must lie in (0,1)");
    if (!(v_thr > 0.0)) throw ConfigError("lif: v_thr must be > 0");
    if (!(surrogate_slope > 0.0)) throw ConfigError("lif: surrogate_slope must be > 0");
  }

  friend bool operator==(const LifParams&, const LifParams&) = default;
};

// Forward nonlinearity. Hard is the Heaviside spike; soft replaces it with
// x / (1 + k|x|) + 1/k, whose derivative is exactly surrogate_grad. Soft mode
// exists so the backward pass can be checked against finite differences.
enum class SpikeMode { hard, soft };

// Fast-sigmoid surrogate derivative of the spike threshold.
template <class S>
S surrogate_grad(S v_minus_thr, S slope) {
  const S d = S(1) + slope * std::abs(v_minus_thr);
  return S(1) / (d * d);
}

template <class S>
S spike_fn(S v_minus_thr, S slope, SpikeMode mode) {
  if (mode == SpikeMode::hard) return v_minus_thr > S(0) ? S(1) : S(0);
  return v_minus_thr / (S(1) + slope * std::abs(v_minus_thr)) + S(1) / slope;
}

template <class S>
struct LifState {
  S v;
  S spike;
};

template <class S>
LifState<S> lif_step(S v_prev, S current, S prev_spike, const LifParams& p,
                     SpikeMode mode = SpikeMode::hard) {
  if (!std::isfinite(v_prev) || !std::isfinite(current))
    throw NumericError("lif_step: non-finite input");
  const S thr = static_cast<S>(p.v_thr);
  const S v = static_cast<S>(p.gamma) * v_prev + current - prev_spike * thr;
  return {v, spike_fn<S>(v - thr, static_cast<S>(p.surrogate_slope), mode)};
}

// Layer-wide step. `v` holds V[t-1] on entry and V[t] on exit; `spikes` holds
// S[t-1] on entry and S[t] on exit.
template <class S>
void lif_step(std::span<S> v, std::span<const S> current, std::span<S> spikes,
              const LifParams& p, SpikeMode mode = SpikeMode::hard) {
  if (v.size() != current.size() || v.size() != spikes.size())
    throw ShapeError("lif_step: shape mismatch");
  const S gamma = static_cast<S>(p.gamma);
  const S thr = static_cast<S>(p.v_thr);
  const S slope = static_cast<S>(p.surrogate_slope);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const S nv = gamma * v[i] + current[i] - spikes[i] * thr;
    if (!std::isfinite(nv)) throw NumericError("lif_step: non-finite membrane potential");
    v[i] = nv;
    spikes[i] = spike_fn<S>(nv - thr, slope, mode);
  }
}

}  // namespace nbsnn
