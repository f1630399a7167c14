#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nbsnn/dataset.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/rng.hpp"

namespace nbsnn {

inline constexpr int kDefaultTimeSteps = 50;

// Binary spike tensor, T x 8 x 16, time-major.
class SpikeTrain {
 public:
  static constexpr int rows = FeatureGrid::rows;
  static constexpr int cols = FeatureGrid::cols;
  static constexpr int frame_size = rows * cols;

  SpikeTrain() = default;
  explicit SpikeTrain(int steps)
      : steps_(steps), spikes_(static_cast<std::size_t>(steps) * frame_size, 0) {
    if (steps < 1) throw ShapeError("SpikeTrain: T must be >= 1");
  }

  int steps() const noexcept { return steps_; }

  std::uint8_t& at(int t, int r, int c) { return spikes_[index(t, r, c)]; }
  std::uint8_t at(int t, int r, int c) const { return spikes_[index(t, r, c)]; }

  std::span<const std::uint8_t> frame(int t) const {
    return {spikes_.data() + static_cast<std::size_t>(t) * frame_size, frame_size};
  }
  std::span<std::uint8_t> frame(int t) {
    return {spikes_.data() + static_cast<std::size_t>(t) * frame_size, frame_size};
  }

  std::span<const std::uint8_t> data() const noexcept { return spikes_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto s : spikes_) n += s;
    return n;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

 private:
  std::size_t index(int t, int r, int c) const {
    return (static_cast<std::size_t>(t) * rows + static_cast<std::size_t>(r)) * cols +
           static_cast<std::size_t>(c);
  }

  int steps_ = 0;
  std::vector<std::uint8_t> spikes_;
};

// Bernoulli rate code: every cell fires independently per step with
// probability equal to its grid value.
inline SpikeTrain rate_encode(const FeatureGrid& grid, int steps, Rng& rng) {
  for (double p : grid.values)
    if (!(p >= 0.0 && p <= 1.0))
      throw Error("rate_encode: grid value " + std::to_string(p) + " outside [0,1]");
  SpikeTrain out(steps);
  for (int t = 0; t < steps; ++t) {
    auto f = out.frame(t);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.bernoulli(grid.values[i]) ? 1 : 0;
  }
  return out;
}

inline SpikeTrain rate_encode(const FeatureGrid& grid, int steps, std::uint64_t seed) {
  Rng rng(seed);
  return rate_encode(grid, steps, rng);
}

}  // namespace nbsnn
