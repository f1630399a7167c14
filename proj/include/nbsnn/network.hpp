#pragma once

// Hybrid spiking classifier: conv-LIF -> dense-LIF -> Bayesian dense-LIF,
// simulated over T steps, with backpropagation through time using the
// fast-sigmoid surrogate for the spike threshold.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nbsnn/bayes.hpp"
#include "nbsnn/encoding.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/lif.hpp"
#include "nbsnn/rng.hpp"

namespace nbsnn {

struct ConvGeometry {
  int in_channels = 1;
  int out_channels = 8;
  int kernel = 3;
  int in_rows = FeatureGrid::rows;
  int in_cols = FeatureGrid::cols;
  bool same_padding = true;

  int pad() const { return same_padding ? kernel / 2 : 0; }
  int out_rows() const { return same_padding ? in_rows : in_rows - kernel + 1; }
  int out_cols() const { return same_padding ? in_cols : in_cols - kernel + 1; }
  std::size_t input_size() const {
    return static_cast<std::size_t>(in_channels) * static_cast<std::size_t>(in_rows * in_cols);
  }
  std::size_t output_size() const {
    return static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(out_rows() * out_cols());
  }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels * in_channels * kernel * kernel);
  }

  void validate() const {
    if (in_channels < 1 || out_channels < 1 || kernel < 1)
      throw ConfigError("conv: channels and kernel must be >= 1");
    if (same_padding && kernel % 2 == 0) throw ConfigError("conv: same padding needs an odd kernel");
    if (out_rows() < 1 || out_cols() < 1) throw ConfigError("conv: kernel larger than input");
  }
};

// Stride-1 cross-correlation, added into `out` (C_out x O_h x O_w). Zero
// inputs are skipped, so binary spike maps cost one kernel scatter per spike.
template <class S>
void conv_forward(const ConvGeometry& g, std::span<const S> input, std::span<const S> weights,
                  std::span<S> out) {
  if (input.size() != g.input_size() || weights.size() != g.weight_size() ||
      out.size() != g.output_size())
    throw ShapeError("conv_forward: shape mismatch");
  const int k = g.kernel, pad = g.pad(), oh = g.out_rows(), ow = g.out_cols();
  for (int ci = 0; ci < g.in_channels; ++ci) {
    for (int iy = 0; iy < g.in_rows; ++iy) {
      for (int ix = 0; ix < g.in_cols; ++ix) {
        const S x = input[static_cast<std::size_t>((ci * g.in_rows + iy) * g.in_cols + ix)];
        if (x == S(0)) continue;
        for (int ky = 0; ky < k; ++ky) {
          const int y = iy - ky + pad;
          if (y < 0 || y >= oh) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int xo = ix - kx + pad;
            if (xo < 0 || xo >= ow) continue;
            for (int co = 0; co < g.out_channels; ++co) {
              const S w = weights[static_cast<std::size_t>(((co * g.in_channels + ci) * k + ky) * k + kx)];
              out[static_cast<std::size_t>((co * oh + y) * ow + xo)] += w * x;
            }
          }
        }
      }
    }
  }
}

// dL/dW += sum over positions of dL/dout * input (same scatter as forward).
template <class S>
void conv_weight_grad(const ConvGeometry& g, std::span<const S> input, std::span<const S> d_out,
                      std::span<S> d_weights) {
  const int k = g.kernel, pad = g.pad(), oh = g.out_rows(), ow = g.out_cols();
  for (int ci = 0; ci < g.in_channels; ++ci) {
    for (int iy = 0; iy < g.in_rows; ++iy) {
      for (int ix = 0; ix < g.in_cols; ++ix) {
        const S x = input[static_cast<std::size_t>((ci * g.in_rows + iy) * g.in_cols + ix)];
        if (x == S(0)) continue;
        for (int ky = 0; ky < k; ++ky) {
          const int y = iy - ky + pad;
          if (y < 0 || y >= oh) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int xo = ix - kx + pad;
            if (xo < 0 || xo >= ow) continue;
            for (int co = 0; co < g.out_channels; ++co)
              d_weights[static_cast<std::size_t>(((co * g.in_channels + ci) * k + ky) * k + kx)] +=
                  x * d_out[static_cast<std::size_t>((co * oh + y) * ow + xo)];
          }
        }
      }
    }
  }
}

struct NetworkConfig {
  int conv_channels = 8;
  int kernel = 3;
  bool same_padding = true;
  int hidden = 31;
  int classes = kClasses;
  int time_steps = kDefaultTimeSteps;
  LifParams conv_lif;
  LifParams hidden_lif;
  LifParams output_lif;

  ConvGeometry conv_geometry() const {
    return {1, conv_channels, kernel, FeatureGrid::rows, FeatureGrid::cols, same_padding};
  }
  std::size_t conv_neurons() const { return conv_geometry().output_size(); }

  // Deterministic weights and biases plus both variational tensors (mu, rho)
  // of the Bayesian output layer.
  std::size_t parameter_count() const {
    const auto g = conv_geometry();
    const auto h = static_cast<std::size_t>(hidden);
    const auto c = static_cast<std::size_t>(classes);
    return g.weight_size() + static_cast<std::size_t>(conv_channels) + conv_neurons() * h + h +
           2 * (h * c + c);
  }

  void validate() const {
    conv_geometry().validate();
    if (hidden < 1) throw ConfigError("network: hidden width must be >= 1");
    if (classes != kClasses) throw ConfigError("network: classes must be 6");
    if (time_steps < 1) throw ConfigError("network: time_steps must be >= 1");
    conv_lif.validate();
    hidden_lif.validate();
    output_lif.validate();
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline constexpr std::size_t kParameterTarget = 32768;

template <class S>
struct NetworkParams {
  std::vector<S> conv_w;    // [C_out][1][k][k]
  std::vector<S> conv_b;    // [C_out]
  std::vector<S> hidden_w;  // [conv_neurons][H], input-major
  std::vector<S> hidden_b;  // [H]
  GaussianPosterior<S> out_w;  // [H][classes], input-major
  GaussianPosterior<S> out_b;  // [classes]

  static NetworkParams zeros(const NetworkConfig& cfg) {
    NetworkParams p;
    const auto g = cfg.conv_geometry();
    const auto h = static_cast<std::size_t>(cfg.hidden);
    const auto c = static_cast<std::size_t>(cfg.classes);
    p.conv_w.assign(g.weight_size(), S(0));
    p.conv_b.assign(static_cast<std::size_t>(cfg.conv_channels), S(0));
    p.hidden_w.assign(cfg.conv_neurons() * h, S(0));
    p.hidden_b.assign(h, S(0));
    p.out_w = GaussianPosterior<S>(h * c, S(0), S(0));
    p.out_b = GaussianPosterior<S>(c, S(0), S(0));
    return p;
  }

  // Uniform(+-1/sqrt(fan_in)) weights, zero biases and bias means, constant rho.
  static NetworkParams init(const NetworkConfig& cfg, std::uint64_t seed, double rho_init) {
    NetworkParams p = zeros(cfg);
    Rng rng(derive_seed(seed, Stream::init));
    auto fill = [&rng](std::vector<S>& v, std::size_t fan_in) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& x : v) x = static_cast<S>(rng.uniform(-a, a));
    };
    fill(p.conv_w, static_cast<std::size_t>(cfg.kernel * cfg.kernel));
    fill(p.hidden_w, cfg.conv_neurons());
    fill(p.out_w.mu, static_cast<std::size_t>(cfg.hidden));
    for (auto& r : p.out_w.rho) r = static_cast<S>(rho_init);
    for (auto& r : p.out_b.rho) r = static_cast<S>(rho_init);
    return p;
  }

  // Declared order; checkpoints and the optimizer walk tensors in this order.
  template <class F>
  void for_each_tensor(F&& f) {
    f(std::string_view("conv.weight"), conv_w);
    f(std::string_view("conv.bias"), conv_b);
    f(std::string_view("hidden.weight"), hidden_w);
    f(std::string_view("hidden.bias"), hidden_b);
    f(std::string_view("output.weight.mu"), out_w.mu);
    f(std::string_view("output.weight.rho"), out_w.rho);
    f(std::string_view("output.bias.mu"), out_b.mu);
    f(std::string_view("output.bias.rho"), out_b.rho);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<NetworkParams*>(this)->for_each_tensor(
        [&f](std::string_view name, const std::vector<S>& v) { f(name, v); });
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each_tensor([&n](std::string_view, const std::vector<S>& v) { n += v.size(); });
    return n;
  }

  template <class T>
  NetworkParams<T> cast() const {
    NetworkParams<T> out;
    auto conv = [](const std::vector<S>& v) { return std::vector<T>(v.begin(), v.end()); };
    out.conv_w = conv(conv_w);
    out.conv_b = conv(conv_b);
    out.hidden_w = conv(hidden_w);
    out.hidden_b = conv(hidden_b);
    out.out_w.mu = conv(out_w.mu);
    out.out_w.rho = conv(out_w.rho);
    out.out_b.mu = conv(out_b.mu);
    out.out_b.rho = conv(out_b.rho);
    return out;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.conv_w == b.conv_w && a.conv_b == b.conv_b && a.hidden_w == b.hidden_w &&
           a.hidden_b == b.hidden_b && a.out_w.mu == b.out_w.mu && a.out_w.rho == b.out_w.rho &&
           a.out_b.mu == b.out_b.mu && a.out_b.rho == b.out_b.rho;
  }
};

template <class S>
bool same_shape(const NetworkParams<S>& a, const NetworkParams<S>& b) {
  std::vector<std::size_t> sa, sb;
  a.for_each_tensor([&sa](std::string_view, const std::vector<S>& v) { sa.push_back(v.size()); });
  b.for_each_tensor([&sb](std::string_view, const std::vector<S>& v) { sb.push_back(v.size()); });
  return sa == sb;
}

// One draw of the Bayesian output layer.
template <class S>
struct OutputSample {
  WeightSample<S> w;
  WeightSample<S> b;
};

template <class S>
OutputSample<S> sample_output(const NetworkParams<S>& p, Rng& rng) {
  return {sample_weights(p.out_w, rng), sample_weights(p.out_b, rng)};
}

// Per-layer spike fractions: input encoding, conv, hidden, output.
inline constexpr std::size_t kActivityLayers = 4;
using Activity = std::array<double, kActivityLayers>;
inline constexpr std::array<std::string_view, kActivityLayers> kActivityNames = {
    "input", "conv", "hidden", "output"};

// Membrane and spike history of one forward pass, all layers, all steps.
template <class S>
struct Trace {
  int steps = 0;
  std::vector<S> input;  // T x 128 (copy of the spike train as S)
  std::vector<S> v1, s1; // T x conv_neurons
  std::vector<S> v2, s2; // T x hidden
  std::vector<S> v3, s3; // T x classes
  bool has_output = false;
};

template <class S>
struct ForwardResult {
  std::vector<S> counts;  // per class, in [0, T]
  Activity activity{};
};

template <class S>
class Network {
 public:
  Network(NetworkConfig cfg, NetworkParams<S> params)
      : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    if (!same_shape(params_, NetworkParams<S>::zeros(cfg_)))
      throw ShapeError("Network: parameter shapes do not match config");
  }

  const NetworkConfig& config() const noexcept { return cfg_; }
  const NetworkParams<S>& params() const noexcept { return params_; }
  NetworkParams<S>& params() noexcept { return params_; }

  // Deterministic layers (conv, hidden) over all steps; fills v1/s1/v2/s2.
  void forward_hidden(const SpikeTrain& train, SpikeMode mode, Trace<S>& tr) const {
    const int T = train.steps();
    const auto g = cfg_.conv_geometry();
    const std::size_t n1 = g.output_size(), n2 = static_cast<std::size_t>(cfg_.hidden);
    const std::size_t plane = static_cast<std::size_t>(g.out_rows() * g.out_cols());
    tr.steps = T;
    tr.has_output = false;
    tr.input.assign(static_cast<std::size_t>(T) * SpikeTrain::frame_size, S(0));
    tr.v1.assign(static_cast<std::size_t>(T) * n1, S(0));
    tr.s1.assign(static_cast<std::size_t>(T) * n1, S(0));
    tr.v2.assign(static_cast<std::size_t>(T) * n2, S(0));
    tr.s2.assign(static_cast<std::size_t>(T) * n2, S(0));

    std::vector<S> v1(n1, S(0)), s1(n1, S(0)), cur1(n1);
    std::vector<S> v2(n2, S(0)), s2(n2, S(0)), cur2(n2);
    for (int t = 0; t < T; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      std::span<S> in(tr.input.data() + ts * SpikeTrain::frame_size, SpikeTrain::frame_size);
      const auto frame = train.frame(t);
      for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<S>(frame[i]);

      for (std::size_t c = 0; c < static_cast<std::size_t>(cfg_.conv_channels); ++c)
        std::fill_n(cur1.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, params_.conv_b[c]);
      conv_forward<S>(g, in, params_.conv_w, cur1);
      lif_step<S>(v1, cur1, s1, cfg_.conv_lif, mode);
      std::copy(v1.begin(), v1.end(), tr.v1.begin() + static_cast<std::ptrdiff_t>(ts * n1));
      std::copy(s1.begin(), s1.end(), tr.s1.begin() + static_cast<std::ptrdiff_t>(ts * n1));

      dense_forward(s1, params_.hidden_w, params_.hidden_b, cur2);
      lif_step<S>(v2, cur2, s2, cfg_.hidden_lif, mode);
      std::copy(v2.begin(), v2.end(), tr.v2.begin() + static_cast<std::ptrdiff_t>(ts * n2));
      std::copy(s2.begin(), s2.end(), tr.s2.begin() + static_cast<std::ptrdiff_t>(ts * n2));
    }
  }

  // Output layer with the given weight draw, driven by the recorded hidden
  // spikes. Returns per-class spike counts.
  std::vector<S> forward_output(Trace<S>& tr, std::span<const S> w_out, std::span<const S> b_out,
                                SpikeMode mode) const {
    const std::size_t n2 = static_cast<std::size_t>(cfg_.hidden);
    const std::size_t n3 = static_cast<std::size_t>(cfg_.classes);
    if (w_out.size() != n2 * n3 || b_out.size() != n3) throw ShapeError("forward_output: weight shape");
    const auto T = static_cast<std::size_t>(tr.steps);
    tr.v3.assign(T * n3, S(0));
    tr.s3.assign(T * n3, S(0));
    std::vector<S> v3(n3, S(0)), s3(n3, S(0)), cur3(n3), counts(n3, S(0));
    for (std::size_t t = 0; t < T; ++t) {
      std::span<const S> s2(tr.s2.data() + t * n2, n2);
      dense_forward(s2, w_out, b_out, cur3);
      lif_step<S>(v3, cur3, s3, cfg_.output_lif, mode);
      for (std::size_t o = 0; o < n3; ++o) {
        tr.v3[t * n3 + o] = v3[o];
        tr.s3[t * n3 + o] = s3[o];
        counts[o] += s3[o];
      }
    }
    tr.has_output = true;
    return counts;
  }

  Activity activity(const Trace<S>& tr) const {
    auto frac = [&](const std::vector<S>& s) {
      double n = 0.0;
      for (auto x : s) n += static_cast<double>(x);
      return s.empty() ? 0.0 : n / static_cast<double>(s.size());
    };
    return {frac(tr.input), frac(tr.s1), frac(tr.s2), frac(tr.s3)};
  }

  ForwardResult<S> forward(const SpikeTrain& train, std::span<const S> w_out,
                           std::span<const S> b_out, SpikeMode mode, Trace<S>& tr) const {
    forward_hidden(train, mode, tr);
    ForwardResult<S> r;
    r.counts = forward_output(tr, w_out, b_out, mode);
    r.activity = activity(tr);
    return r;
  }

  ForwardResult<S> forward(const SpikeTrain& train, std::span<const S> w_out,
                           std::span<const S> b_out, SpikeMode mode = SpikeMode::hard) const {
    Trace<S> tr;
    return forward(train, w_out, b_out, mode, tr);
  }

  // Backpropagation through time. `d_counts` is dL/d(count) per class. Adds
  // gradients of the deterministic tensors into `grad` and writes the
  // gradient w.r.t. the sampled output weights/biases into d_w_out/d_b_out
  // (accumulated). The soft-reset term is part of the recurrence.
  void backward(const Trace<S>& tr, std::span<const S> d_counts, std::span<const S> w_out,
                NetworkParams<S>& grad, std::span<S> d_w_out, std::span<S> d_b_out) const {
    if (!tr.has_output || tr.steps < 1) throw Error("backward: missing forward trace");
    const auto g = cfg_.conv_geometry();
    const std::size_t n1 = g.output_size(), n2 = static_cast<std::size_t>(cfg_.hidden),
                      n3 = static_cast<std::size_t>(cfg_.classes);
    const std::size_t plane = static_cast<std::size_t>(g.out_rows() * g.out_cols());
    const auto T = static_cast<std::size_t>(tr.steps);

    const S thr1 = static_cast<S>(cfg_.conv_lif.v_thr), gam1 = static_cast<S>(cfg_.conv_lif.gamma),
            k1 = static_cast<S>(cfg_.conv_lif.surrogate_slope);
    const S thr2 = static_cast<S>(cfg_.hidden_lif.v_thr), gam2 = static_cast<S>(cfg_.hidden_lif.gamma),
            k2 = static_cast<S>(cfg_.hidden_lif.surrogate_slope);
    const S thr3 = static_cast<S>(cfg_.output_lif.v_thr), gam3 = static_cast<S>(cfg_.output_lif.gamma),
            k3 = static_cast<S>(cfg_.output_lif.surrogate_slope);

    std::vector<S> carry1(n1, S(0)), carry2(n2, S(0)), carry3(n3, S(0));
    std::vector<S> dv1(n1), dv2(n2), dv3(n3), ds2(n2), ds1(n1);

    for (std::size_t t = T; t-- > 0;) {
      // output layer
      for (std::size_t o = 0; o < n3; ++o) {
        const S ds = d_counts[o] - thr3 * carry3[o];
        dv3[o] = ds * surrogate_grad<S>(tr.v3[t * n3 + o] - thr3, k3) + gam3 * carry3[o];
        carry3[o] = dv3[o];
        d_b_out[o] += dv3[o];
      }
      const S* s2 = tr.s2.data() + t * n2;
      for (std::size_t i = 0; i < n2; ++i) {
        const S* wrow = w_out.data() + i * n3;
        S acc = S(0);
        for (std::size_t o = 0; o < n3; ++o) acc += wrow[o] * dv3[o];
        ds2[i] = acc;
        if (s2[i] != S(0)) {
          S* grow = d_w_out.data() + i * n3;
          for (std::size_t o = 0; o < n3; ++o) grow[o] += s2[i] * dv3[o];
        }
      }

      // hidden layer
      for (std::size_t h = 0; h < n2; ++h) {
        const S ds = ds2[h] - thr2 * carry2[h];
        dv2[h] = ds * surrogate_grad<S>(tr.v2[t * n2 + h] - thr2, k2) + gam2 * carry2[h];
        carry2[h] = dv2[h];
        grad.hidden_b[h] += dv2[h];
      }
      const S* s1 = tr.s1.data() + t * n1;
      for (std::size_t i = 0; i < n1; ++i) {
        const S* wrow = params_.hidden_w.data() + i * n2;
        S acc = S(0);
        for (std::size_t h = 0; h < n2; ++h) acc += wrow[h] * dv2[h];
        ds1[i] = acc;
        if (s1[i] != S(0)) {
          S* grow = grad.hidden_w.data() + i * n2;
          for (std::size_t h = 0; h < n2; ++h) grow[h] += s1[i] * dv2[h];
        }
      }

      // conv layer
      for (std::size_t i = 0; i < n1; ++i) {
        const S ds = ds1[i] - thr1 * carry1[i];
        dv1[i] = ds * surrogate_grad<S>(tr.v1[t * n1 + i] - thr1, k1) + gam1 * carry1[i];
        carry1[i] = dv1[i];
      }
      for (std::size_t c = 0; c < static_cast<std::size_t>(cfg_.conv_channels); ++c) {
        S acc = S(0);
        for (std::size_t j = 0; j < plane; ++j) acc += dv1[c * plane + j];
        grad.conv_b[c] += acc;
      }
      std::span<const S> in(tr.input.data() + t * SpikeTrain::frame_size, SpikeTrain::frame_size);
      conv_weight_grad<S>(g, in, dv1, grad.conv_w);
    }
  }

 private:
  // out = b + x^T W with W input-major; zero inputs skipped.
  static void dense_forward(std::span<const S> x, std::span<const S> w, std::span<const S> b,
                            std::span<S> out) {
    const std::size_t n_out = out.size();
    std::copy(b.begin(), b.end(), out.begin());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const S xi = x[i];
      if (xi == S(0)) continue;
      const S* row = w.data() + i * n_out;
      for (std::size_t o = 0; o < n_out; ++o) out[o] += xi * row[o];
    }
  }

  NetworkConfig cfg_;
  NetworkParams<S> params_;
};

// Adds the reparameterization gradient of a sampled tensor into (mu, rho):
// dw/dmu = 1, dw/drho = eps * sigmoid(rho).
template <class S>
void posterior_grad(const GaussianPosterior<S>& q, const WeightSample<S>& draw,
                    std::span<const S> d_w, std::span<S> grad_mu, std::span<S> grad_rho) {
  for (std::size_t i = 0; i < q.size(); ++i) {
    grad_mu[i] += d_w[i];
    grad_rho[i] += d_w[i] * draw.eps[i] * sigmoid(q.rho[i]);
  }
}

// Cross-entropy of softmax(counts / T * tau) against a 1-based label.
// Writes dL/dcounts.
template <class S>
double count_cross_entropy(std::span<const S> counts, int label, int steps, double tau,
                           std::span<S> d_counts) {
  std::array<double, kClasses> c{};
  for (std::size_t k = 0; k < kClasses; ++k) c[k] = static_cast<double>(counts[k]);
  const auto p = count_probabilities(c, steps, tau);
  const auto y = static_cast<std::size_t>(label - 1);
  for (std::size_t k = 0; k < kClasses; ++k)
    d_counts[k] = static_cast<S>((p[k] - (k == y ? 1.0 : 0.0)) * tau / steps);
  return -std::log(std::max(p[y], 1e-300));
}

}  // namespace nbsnn
