#pragma once

// The three evaluation settings (pooled split, short-term drift, long-term
// drift), accuracy/confusion reports, and their CSV and SVG renderings.

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nbsnn/dataset.hpp"
#include "nbsnn/model.hpp"
#include "nbsnn/train.hpp"

namespace nbsnn {

enum class Setting { split, short_term, long_term };

inline std::string_view setting_name(Setting s) {
  switch (s) {
    case Setting::split: return "split";
    case Setting::short_term: return "short";
    case Setting::long_term: return "long";
  }
  return "?";
}

inline Setting parse_setting(std::string_view s) {
  if (s == "split") return Setting::split;
  if (s == "short") return Setting::short_term;
  if (s == "long") return Setting::long_term;
  throw ConfigError("unknown setting '" + std::string(s) + "' (expected split, short or long)");
}

// Published accuracies of the neuro-Bayesian model, used only as side-by-side
// reference columns.
inline constexpr double kSplitReference = 98.47;
inline constexpr std::array<double, 9> kShortTermReference = {94.12, 92.5, 93.05, 86.7, 88.5,
                                                               83.0,  87.5, 86.5,  81.2};
inline constexpr double kShortTermReferenceAvg = 88.12;
inline constexpr std::array<double, 9> kLongTermReference = {94.12, 93.35, 87.15, 91.21, 83.11,
                                                              87.14, 74.13, 76.23, 71.4};
inline constexpr double kLongTermReferenceAvg = 84.20;

using Confusion = std::array<std::array<long, kClasses>, kClasses>;  // [true][pred]

struct EvalReport {
  std::string pair;  // "1-2", or "split"
  int train_batch = 0;
  int test_batch = 0;
  double accuracy = 0.0;  // percent
  Confusion confusion{};
  double mean_entropy = 0.0;
  std::optional<double> reference;
  long total = 0;

  long correct() const {
    long c = 0;
    for (std::size_t k = 0; k < kClasses; ++k) c += confusion[k][k];
    return c;
  }

  // Recall per class; nullopt for classes absent from the test set.
  std::array<std::optional<double>, kClasses> per_class_accuracy() const {
    std::array<std::optional<double>, kClasses> out;
    for (std::size_t k = 0; k < kClasses; ++k) {
      long row = 0;
      for (auto v : confusion[k]) row += v;
      if (row > 0) out[k] = 100.0 * static_cast<double>(confusion[k][k]) / static_cast<double>(row);
    }
    return out;
  }
};

struct EvalConfig {
  int samples = 20;  // Monte Carlo draws per prediction
  std::uint64_t seed = 42;
  int threads = 1;
};

inline EvalReport evaluate(const Model& model, std::span<const GasSample> test, const EvalConfig& cfg) {
  if (test.empty()) throw Error("evaluate: empty test set");
  std::vector<Predictive> preds(test.size());
  parallel_for(test.size(), cfg.threads, [&](std::size_t i, std::size_t) {
    preds[i] = predict_sample(test[i], model, cfg.samples, derive_seed(cfg.seed, Stream::predict, {i}));
  });
  EvalReport r;
  r.total = static_cast<long>(test.size());
  double h = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(test[i].label - 1)][static_cast<std::size_t>(preds[i].label - 1)];
    h += preds[i].entropy;
  }
  r.mean_entropy = h / static_cast<double>(test.size());
  r.accuracy = 100.0 * static_cast<double>(r.correct()) / static_cast<double>(r.total);
  return r;
}

struct SettingConfig {
  TrainConfig train;
  EvalConfig eval;
  double split_ratio = 0.8;
};

struct SettingResult {
  Setting setting = Setting::split;
  std::vector<EvalReport> reports;
  std::vector<std::vector<EpochStats>> curves;  // one per trained model
  double average = 0.0;
  std::optional<double> reference_average;
};

using ProgressFn = std::function<void(const std::string&)>;

inline double mean_accuracy(std::span<const EvalReport> reports) {
  double s = 0.0;
  for (const auto& r : reports) s += r.accuracy;
  return reports.empty() ? 0.0 : s / static_cast<double>(reports.size());
}

// split: stratified split of all batches pooled, one report.
// short: train on batch i, test on i+1, i = 1..9.
// long: train once on batch 1, test on batches 2..10.
// Every trained model fits its own normalization stats on its training data.
inline SettingResult run_setting(Setting setting, const SettingConfig& cfg, const Dataset& ds,
                                 const ProgressFn& progress = {}) {
  SettingResult out;
  out.setting = setting;
  auto note = [&](const std::string& s) {
    if (progress) progress(s);
  };
  auto batch = [&](int b) -> const std::vector<GasSample>& { return ds[static_cast<std::size_t>(b - 1)]; };

  if (setting == Setting::split) {
    const auto pool = pool_all(ds);
    const auto sp = random_split(pool, cfg.split_ratio, cfg.train.seed);
    note("split: training on " + std::to_string(sp.train.size()) + " samples");
    auto tr = train(cfg.train, sp.train);
    auto rep = evaluate(tr.model, sp.test, cfg.eval);
    rep.pair = "split";
    rep.reference = kSplitReference;
    out.reports.push_back(std::move(rep));
    out.curves.push_back(std::move(tr.curve));
    out.reference_average = kSplitReference;
  } else if (setting == Setting::short_term) {
    const auto pairs = short_term_pairs();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [a, b] = pairs[i];
      note("short: " + std::to_string(a) + " -> " + std::to_string(b));
      auto tr = train(cfg.train, batch(a));
      auto rep = evaluate(tr.model, batch(b), cfg.eval);
      rep.pair = std::to_string(a) + "-" + std::to_string(b);
      rep.train_batch = a;
      rep.test_batch = b;
      rep.reference = kShortTermReference[i];
      out.reports.push_back(std::move(rep));
      out.curves.push_back(std::move(tr.curve));
    }
    out.reference_average = kShortTermReferenceAvg;
  } else {
    const auto pairs = long_term_pairs();
    note("long: training on batch 1");
    auto tr = train(cfg.train, batch(1));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [a, b] = pairs[i];
      note("long: " + std::to_string(a) + " -> " + std::to_string(b));
      auto rep = evaluate(tr.model, batch(b), cfg.eval);
      rep.pair = std::to_string(a) + "-" + std::to_string(b);
      rep.train_batch = a;
      rep.test_batch = b;
      rep.reference = kLongTermReference[i];
      out.reports.push_back(std::move(rep));
    }
    out.curves.push_back(std::move(tr.curve));
    out.reference_average = kLongTermReferenceAvg;
  }
  out.average = mean_accuracy(out.reports);
  return out;
}

// ---------------------------------------------------------------------------
// Output formats

namespace detail {
inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace detail

// pair,accuracy,reference,delta plus a trailing "avg" row.
inline void write_report_csv(std::ostream& os, const SettingResult& r) {
  os << "pair,accuracy,reference,delta\n";
  auto row = [&os](const std::string& name, double acc, std::optional<double> ref) {
    os << name << ',' << detail::fmt("%.4f", acc) << ',';
    if (ref) os << detail::fmt("%.2f", *ref) << ',' << detail::fmt("%.4f", acc - *ref);
    else os << ',';
    os << '\n';
  };
  for (const auto& rep : r.reports) row(rep.pair, rep.accuracy, rep.reference);
  row("avg", r.average, r.reference_average);
}

inline void write_confusion_csv(std::ostream& os, const EvalReport& r) {
  os << "true\\pred";
  for (auto n : kClassNames) os << ',' << n;
  os << '\n';
  for (std::size_t t = 0; t < kClasses; ++t) {
    os << kClassNames[t];
    for (std::size_t p = 0; p < kClasses; ++p) os << ',' << r.confusion[t][p];
    os << '\n';
  }
}

// Grouped bar chart, measured vs. published accuracy per pair.
inline void write_report_svg(std::ostream& os, const SettingResult& r) {
  const int n = static_cast<int>(r.reports.size()) + 1;
  const int left = 60, top = 40, plot_h = 300, group_w = 70, bar_w = 26;
  const int width = left + n * group_w + 40, height = top + plot_h + 70;
  auto y_of = [&](double acc) { return top + plot_h * (1.0 - acc / 100.0); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">Accuracy, setting "
     << setting_name(r.setting) << "</text>\n";
  for (int tick = 0; tick <= 100; tick += 20) {
    const double y = y_of(tick);
    os << "<line x1=\"" << left << "\" y1=\"" << detail::fmt("%.1f", y) << "\" x2=\"" << width - 30
       << "\" y2=\"" << detail::fmt("%.1f", y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << detail::fmt("%.1f", y + 4) << "\" text-anchor=\"end\">"
       << tick << "</text>\n";
  }
  auto bar = [&](double x, double acc, const char* color) {
    const double y = y_of(acc);
    os << "<rect x=\"" << detail::fmt("%.1f", x) << "\" y=\"" << detail::fmt("%.2f", y) << "\" width=\""
       << bar_w << "\" height=\"" << detail::fmt("%.2f", top + plot_h - y) << "\" fill=\"" << color
       << "\"/>\n";
  };
  for (int i = 0; i < n; ++i) {
    const bool avg = i == n - 1;
    const double acc = avg ? r.average : r.reports[static_cast<std::size_t>(i)].accuracy;
    const auto ref = avg ? r.reference_average : r.reports[static_cast<std::size_t>(i)].reference;
    const double x0 = left + i * group_w + 8;
    bar(x0, acc, "#3b6ea5");
    if (ref) bar(x0 + bar_w, *ref, "#d9822b");
    os << "<text x=\"" << detail::fmt("%.1f", x0 + bar_w) << "\" y=\"" << top + plot_h + 16
       << "\" text-anchor=\"middle\">"
       << (avg ? std::string("avg") : r.reports[static_cast<std::size_t>(i)].pair) << "</text>\n";
  }
  const int ly = top + plot_h + 40;
  os << "<rect x=\"" << left << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\"#3b6ea5\"/>"
     << "<text x=\"" << left + 16 << "\" y=\"" << ly + 10 << "\">measured</text>\n";
  os << "<rect x=\"" << left + 100 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\"#d9822b\"/>"
     << "<text x=\"" << left + 116 << "\" y=\"" << ly + 10 << "\">reference</text>\n";
  os << "</svg>\n";
}

inline void write_loss_curve_csv(std::ostream& os, std::span<const EpochStats> curve) {
  os << "epoch,loss,train_acc\n";
  for (const auto& e : curve)
    os << e.epoch << ',' << detail::fmt("%.6f", e.loss) << ',' << detail::fmt("%.4f", e.train_acc) << '\n';
}

}  // namespace nbsnn
