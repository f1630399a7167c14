#pragma once

#include <cmath>
#include <cstddef>
#include <string_view>
#include <vector>

#include "nbsnn/network.hpp"

namespace nbsnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Adam with bias correction. Moments are kept in double, one buffer per
// tensor in declared order.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  template <class S>
  void step(NetworkParams<S>& params, const NetworkParams<S>& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<const std::vector<S>*> grads;
    grad.for_each_tensor([&grads](std::string_view, const std::vector<S>& g) { grads.push_back(&g); });
    std::size_t k = 0;
    params.for_each_tensor([&](std::string_view, std::vector<S>& p) {
      if (m_.size() <= k) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
      auto& m = m_[k];
      auto& v = v_[k];
      const auto& g = *grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double upd = cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        p[i] = static_cast<S>(static_cast<double>(p[i]) - upd);
      }
      ++k;
    });
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace nbsnn
