#pragma once

// Gas sensor array drift dataset: batch-file parsing, census validation,
// feature math for raw responses, normalization and 8x16 reshaping, and the
// train/test protocols.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nbsnn/error.hpp"
#include "nbsnn/rng.hpp"

namespace nbsnn {

inline constexpr int kSensors = 16;
inline constexpr int kFeaturesPerSensor = 8;
inline constexpr int kFeatures = kSensors * kFeaturesPerSensor;  // 128
inline constexpr int kClasses = 6;
inline constexpr int kBatches = 10;

inline constexpr std::array<std::string_view, kClasses> kClassNames = {
    "ethanol", "ethylene", "ammonia", "acetaldehyde", "acetone", "toluene"};

struct GasSample {
  std::array<double, kFeatures> features{};  // sensor-major: 8s..8s+7 is sensor s
  int label = 1;                             // 1..6
  int batch_id = 1;                          // 1..10

  friend bool operator==(const GasSample&, const GasSample&) = default;
};

// values[r * 16 + c]: row r is the feature kind, column c the sensor.
struct FeatureGrid {
  static constexpr int rows = kFeaturesPerSensor;
  static constexpr int cols = kSensors;
  std::array<double, kFeatures> values{};

  double& at(int r, int c) { return values[static_cast<std::size_t>(r * cols + c)]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
};

// Flat feature index for grid cell (r, c).
constexpr int grid_source_index(int r, int c) { return c * kFeaturesPerSensor + r; }

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view tok, T& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace detail

// Parses one batch file: "LABEL[;CONC] IDX:VAL ..." per line, 128 dense
// features with 1-based indices. Blank lines are skipped.
inline std::vector<GasSample> parse_batch_file(std::istream& in, int batch_id) {
  if (batch_id < 1 || batch_id > kBatches)
    throw Error("batch id " + std::to_string(batch_id) + " outside 1..10");
  std::vector<GasSample> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;

    GasSample s;
    s.batch_id = batch_id;
    std::array<bool, kFeatures> seen{};
    int count = 0;
    bool first = true;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      auto end = line.find_first_of(" \t", pos);
      if (end == std::string_view::npos) end = line.size();
      std::string_view tok = line.substr(pos, end - pos);
      pos = end;

      if (first) {
        first = false;
        if (tok.find(':') != std::string_view::npos)
          throw ParseError(line_no, "missing label");
        std::string_view label_tok = tok;
        if (auto semi = tok.find(';'); semi != std::string_view::npos) {
          label_tok = tok.substr(0, semi);
          double conc = 0.0;
          if (!detail::parse_number(tok.substr(semi + 1), conc))
            throw ParseError(line_no, "bad concentration '" + std::string(tok) + "'");
        }
        int label = 0;
        double label_real = 0.0;
        if (!detail::parse_number(label_tok, label)) {
          // Some exports write labels as "1.0".
          if (!detail::parse_number(label_tok, label_real) ||
              label_real != std::floor(label_real))
            throw ParseError(line_no, "bad label '" + std::string(label_tok) + "'");
          label = static_cast<int>(label_real);
        }
        if (label < 1 || label > kClasses)
          throw ParseError(line_no, "label " + std::to_string(label) + " outside 1..6");
        s.label = label;
        continue;
      }

      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected IDX:VAL, got '" + std::string(tok) + "'");
      int idx = 0;
      if (!detail::parse_number(tok.substr(0, colon), idx))
        throw ParseError(line_no, "bad feature index '" + std::string(tok) + "'");
      if (idx < 1 || idx > kFeatures)
        throw ParseError(line_no, "feature index " + std::to_string(idx) + " outside 1..128");
      double v = 0.0;
      if (!detail::parse_number(tok.substr(colon + 1), v) || !std::isfinite(v))
        throw ParseError(line_no, "bad value '" + std::string(tok) + "'");
      const auto k = static_cast<std::size_t>(idx - 1);
      if (seen[k])
        throw ParseError(line_no, "duplicate feature index " + std::to_string(idx));
      seen[k] = true;
      s.features[k] = v;
      ++count;
    }
    if (count != kFeatures)
      throw ParseError(line_no, "expected 128 features, found " + std::to_string(count));
    out.push_back(s);
  }
  return out;
}

inline std::vector<GasSample> parse_batch_file(std::string_view text, int batch_id) {
  std::istringstream in{std::string(text)};
  return parse_batch_file(in, batch_id);
}

// Writes samples in the same line format; values are written with enough
// digits to parse back to the identical double.
inline void write_batch_file(std::ostream& out, std::span<const GasSample> samples) {
  char buf[64];
  for (const auto& s : samples) {
    out << s.label;
    for (int i = 0; i < kFeatures; ++i) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, s.features[static_cast<std::size_t>(i)]);
      out << ' ' << (i + 1) << ':' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

struct BatchCensus {
  int batch = 0;
  int total = 0;
  std::array<int, kClasses> per_class{};

  friend bool operator==(const BatchCensus&, const BatchCensus&) = default;
};

// Published per-batch composition of the drift dataset.
inline constexpr std::array<BatchCensus, kBatches> kExpectedCensus = {{
    {1, 445, {83, 30, 70, 98, 90, 74}},
    {2, 1244, {100, 109, 532, 334, 164, 5}},
    {3, 1586, {216, 240, 275, 490, 365, 0}},
    {4, 161, {12, 30, 12, 43, 64, 0}},
    {5, 197, {20, 46, 63, 40, 28, 0}},
    {6, 2300, {110, 29, 606, 574, 514, 467}},
    {7, 3613, {360, 744, 630, 662, 649, 568}},
    {8, 294, {40, 33, 143, 30, 30, 18}},
    {9, 470, {100, 75, 78, 55, 61, 101}},
    {10, 3600, {600, 600, 600, 600, 600, 600}},
}};

inline constexpr int kExpectedTotal = 13910;

inline BatchCensus census_of(int batch, std::span<const GasSample> samples) {
  BatchCensus c;
  c.batch = batch;
  c.total = static_cast<int>(samples.size());
  for (const auto& s : samples) ++c.per_class[static_cast<std::size_t>(s.label - 1)];
  return c;
}

using Dataset = std::array<std::vector<GasSample>, kBatches>;

enum class CensusPolicy { strict, lenient };

inline void check_census(const BatchCensus& got) {
  const auto& want = kExpectedCensus[static_cast<std::size_t>(got.batch - 1)];
  if (got.total != want.total)
    throw CensusError("batch " + std::to_string(got.batch) + ": " + std::to_string(got.total) +
                      " != " + std::to_string(want.total) + " samples");
  for (int k = 0; k < kClasses; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (got.per_class[i] != want.per_class[i])
      throw CensusError("batch " + std::to_string(got.batch) + " " +
                        std::string(kClassNames[i]) + ": " + std::to_string(got.per_class[i]) +
                        " != " + std::to_string(want.per_class[i]));
  }
}

// Loads batch1.dat..batch10.dat. Strict policy also enforces the published
// census; lenient only requires all ten files to exist and parse.
inline Dataset load_dataset(const std::filesystem::path& dir,
                            CensusPolicy policy = CensusPolicy::strict) {
  Dataset ds;
  for (int b = 1; b <= kBatches; ++b) {
    const auto file = dir / ("batch" + std::to_string(b) + ".dat");
    std::ifstream in(file);
    if (!in) throw CensusError("batch " + std::to_string(b) + " absent (" + file.string() + ")");
    try {
      ds[static_cast<std::size_t>(b - 1)] = parse_batch_file(in, b);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), file.filename().string() + ": " + e.what());
    }
    if (policy == CensusPolicy::strict)
      check_census(census_of(b, ds[static_cast<std::size_t>(b - 1)]));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Normalization

// sign(x) * ln(1 + |x|)
inline double log_transform(double x) { return std::copysign(std::log1p(std::fabs(x)), x); }

struct NormalizationStats {
  std::array<double, kFeatures> min{};
  std::array<double, kFeatures> max{};
};

inline NormalizationStats fit_stats(std::span<const GasSample> train) {
  if (train.empty()) throw Error("fit_stats: empty training set");
  NormalizationStats st;
  st.min.fill(INFINITY);
  st.max.fill(-INFINITY);
  for (const auto& s : train) {
    for (std::size_t i = 0; i < kFeatures; ++i) {
      const double v = log_transform(s.features[i]);
      st.min[i] = std::min(st.min[i], v);
      st.max[i] = std::max(st.max[i], v);
    }
  }
  return st;
}

// Log-transform, min-max scale against training stats, clamp to [0,1], and
// reshape to the 8x16 grid. A degenerate feature (min == max) maps to 0.
inline FeatureGrid scale(const GasSample& s, const NormalizationStats& st) {
  FeatureGrid g;
  for (int r = 0; r < FeatureGrid::rows; ++r) {
    for (int c = 0; c < FeatureGrid::cols; ++c) {
      const auto i = static_cast<std::size_t>(grid_source_index(r, c));
      const double span = st.max[i] - st.min[i];
      double v = 0.0;
      if (span > 0.0) v = std::clamp((log_transform(s.features[i]) - st.min[i]) / span, 0.0, 1.0);
      g.at(r, c) = v;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Feature math on a raw resistance response r[0..K-1]

struct SteadyStateFeatures {
  double delta_r = 0.0;
  double normalized_delta_r = 0.0;
};

inline SteadyStateFeatures steady_state_features(std::span<const double> r) {
  if (r.empty()) throw Error("steady_state_features: empty response");
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  SteadyStateFeatures f;
  f.delta_r = *hi - *lo;
  if (*lo == 0.0) throw NumericError("steady_state_features: min response is zero");
  f.normalized_delta_r = f.delta_r / *lo;
  return f;
}

struct TransientFeatures {
  double rise = 0.0;   // max_k ema
  double decay = 0.0;  // min_k ema
};

// ema[0] = 0, ema[k] = (1 - alpha) ema[k-1] + alpha (r[k] - r[k-1]).
inline TransientFeatures ema_features(std::span<const double> r, double alpha) {
  if (r.size() < 2) throw Error("ema_features: need at least 2 points");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("ema_features: alpha outside (0,1)");
  double ema = 0.0;
  TransientFeatures f{0.0, 0.0};
  for (std::size_t k = 1; k < r.size(); ++k) {
    ema = (1.0 - alpha) * ema + alpha * (r[k] - r[k - 1]);
    f.rise = std::max(f.rise, ema);
    f.decay = std::min(f.decay, ema);
  }
  return f;
}

inline constexpr std::array<double, 3> kEmaAlphas = {0.001, 0.01, 0.1};

// All eight per-sensor features in file order: dR, |dR|, rise(a) x3, decay(a) x3.
inline std::array<double, kFeaturesPerSensor> sensor_features(std::span<const double> r) {
  const auto ss = steady_state_features(r);
  std::array<double, kFeaturesPerSensor> out{};
  out[0] = ss.delta_r;
  out[1] = ss.normalized_delta_r;
  for (std::size_t a = 0; a < kEmaAlphas.size(); ++a) {
    const auto t = ema_features(r, kEmaAlphas[a]);
    out[2 + a] = t.rise;
    out[5 + a] = t.decay;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Protocols

struct Split {
  std::vector<GasSample> train;
  std::vector<GasSample> test;
};

// Stratified by class: each class contributes round(ratio * n_class) samples
// to train. Input order is preserved within each side.
inline Split random_split(std::span<const GasSample> pool, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("random_split: ratio outside (0,1)");
  std::array<std::vector<std::size_t>, kClasses> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i)
    by_class[static_cast<std::size_t>(pool[i].label - 1)].push_back(i);
  std::vector<char> to_train(pool.size(), 0);
  for (std::size_t k = 0; k < kClasses; ++k) {
    auto& idx = by_class[k];
    Rng rng(derive_seed(seed, Stream::split, {k}));
    rng.shuffle(idx.begin(), idx.end());
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    for (std::size_t j = 0; j < n_train; ++j) to_train[idx[j]] = 1;
  }
  Split out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (to_train[i] ? out.train : out.test).push_back(pool[i]);
  return out;
}

inline std::vector<GasSample> pool_all(const Dataset& ds) {
  std::vector<GasSample> all;
  for (const auto& b : ds) all.insert(all.end(), b.begin(), b.end());
  return all;
}

struct BatchPair {
  int train = 0;
  int test = 0;
  friend bool operator==(const BatchPair&, const BatchPair&) = default;
};

inline std::vector<BatchPair> short_term_pairs() {
  std::vector<BatchPair> p;
  for (int i = 1; i < kBatches; ++i) p.push_back({i, i + 1});
  return p;
}

inline std::vector<BatchPair> long_term_pairs() {
  std::vector<BatchPair> p;
  for (int j = 2; j <= kBatches; ++j) p.push_back({1, j});
  return p;
}

}  // namespace nbsnn
