#pragma once

// Inference energy of a network run as an ANN (one MAC per FLOP) versus as
// an SNN (one accumulate per FLOP that is actually driven by a spike, per
// time step), 45 nm CMOS constants.

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "nbsnn/error.hpp"
#include "nbsnn/model.hpp"
#include "nbsnn/network.hpp"

namespace nbsnn {

struct EnergyConstants {
  double multiply_pj = 3.1;  // 32-bit multiply
  double add_pj = 0.1;       // 32-bit add
  double e_mac_pj = 3.2;
  double e_ac_pj = 0.1;
};

struct ConvLayerDesc {
  long out_rows = 0;
  long out_cols = 0;
  long kernel = 0;
  long in_channels = 0;
  long out_channels = 0;
};

struct DenseLayerDesc {
  long in = 0;
  long out = 0;
};

using LayerDesc = std::variant<ConvLayerDesc, DenseLayerDesc>;

// conv: O_h * O_w * k^2 * C_in * C_out; dense: in * out.
inline std::uint64_t flops_ann(const LayerDesc& layer) {
  return std::visit(
      [](const auto& l) -> std::uint64_t {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, ConvLayerDesc>) {
          if (l.out_rows <= 0 || l.out_cols <= 0 || l.kernel <= 0 || l.in_channels <= 0 || l.out_channels <= 0)
            throw Error("flops_ann: conv dimensions must be positive");
          return static_cast<std::uint64_t>(l.out_rows * l.out_cols * l.kernel * l.kernel * l.in_channels *
                                            l.out_channels);
        } else {
          if (l.in <= 0 || l.out <= 0) throw Error("flops_ann: dense dimensions must be positive");
          return static_cast<std::uint64_t>(l.in * l.out);
        }
      },
      layer);
}

inline double flops_snn(double flops_ann_value, double spiking_activity) {
  if (!(spiking_activity >= 0.0 && spiking_activity <= 1.0))
    throw Error("flops_snn: spiking activity outside [0,1]");
  return flops_ann_value * spiking_activity;
}

struct LayerEnergy {
  std::string name;
  double flops_ann = 0.0;
  double spiking_activity = 0.0;
  double flops_snn = 0.0;
};

struct EnergyProfile {
  std::vector<LayerEnergy> layers;
  int time_steps = 1;
  double e_ann_nj = 0.0;
  double e_snn_nj = 0.0;
  double ratio = 0.0;
  std::string mode;

  double total_flops_ann() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.flops_ann;
    return s;
  }
  double total_flops_snn() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.flops_snn;
    return s;
  }
};

// e_ann = sum(FLOPS_ann) * E_MAC; e_snn = sum(FLOPS_snn) * E_AC * T.
inline EnergyProfile energy_from_layers(std::vector<LayerEnergy> layers, int time_steps,
                                        const EnergyConstants& k, std::string mode) {
  if (layers.empty()) throw Error("energy_report: empty network");
  if (time_steps < 1) throw Error("energy_report: T must be >= 1");
  EnergyProfile p;
  p.layers = std::move(layers);
  p.time_steps = time_steps;
  p.mode = std::move(mode);
  p.e_ann_nj = p.total_flops_ann() * k.e_mac_pj * 1e-3;
  p.e_snn_nj = p.total_flops_snn() * k.e_ac_pj * time_steps * 1e-3;
  p.ratio = p.e_snn_nj > 0.0 ? p.e_ann_nj / p.e_snn_nj : 0.0;
  return p;
}

inline EnergyProfile energy_report(std::span<const std::uint64_t> flops,
                                   std::span<const double> activity, int time_steps,
                                   const EnergyConstants& k = {}, std::string mode = "measured",
                                   std::span<const std::string> names = {}) {
  if (flops.size() != activity.size()) throw Error("energy_report: flops and activity lists differ in length");
  std::vector<LayerEnergy> layers;
  for (std::size_t i = 0; i < flops.size(); ++i) {
    const auto f = static_cast<double>(flops[i]);
    layers.push_back({i < names.size() ? names[i] : "layer" + std::to_string(i + 1), f, activity[i],
                      flops_snn(f, activity[i])});
  }
  return energy_from_layers(std::move(layers), time_steps, k, std::move(mode));
}

inline constexpr std::uint64_t kPublishedFlopsAnn = 482304;
inline constexpr std::uint64_t kPublishedFlopsSnn = 125254;
inline constexpr double kPublishedMeanActivity = 0.23;

// The published network totals taken as opaque inputs at T = 50.
inline EnergyProfile golden_energy_profile(const EnergyConstants& k = {}) {
  const auto ann = static_cast<double>(kPublishedFlopsAnn);
  const auto snn = static_cast<double>(kPublishedFlopsSnn);
  return energy_from_layers({{"network", ann, snn / ann, snn}}, kDefaultTimeSteps, k, "golden");
}

// Weighted layers of the classifier, in forward order.
inline std::vector<std::pair<std::string, LayerDesc>> network_layers(const NetworkConfig& c) {
  const auto g = c.conv_geometry();
  return {
      {"conv", ConvLayerDesc{g.out_rows(), g.out_cols(), g.kernel, g.in_channels, g.out_channels}},
      {"hidden", DenseLayerDesc{static_cast<long>(c.conv_neurons()), c.hidden}},
      {"output", DenseLayerDesc{c.hidden, c.classes}},
  };
}

// Mean per-layer spike fraction over `samples`, one posterior draw each.
inline Activity measure_activity(const Model& model, std::span<const GasSample> samples,
                                 std::uint64_t seed) {
  if (samples.empty()) throw Error("measure_activity: empty sample set");
  Activity sum{};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Activity a{};
    predict_sample(samples[i], model, 1, derive_seed(seed, {i}), &a);
    for (std::size_t l = 0; l < kActivityLayers; ++l) sum[l] += a[l];
  }
  for (auto& s : sum) s /= static_cast<double>(samples.size());
  return sum;
}

// A layer's accumulates are driven by the spikes of the layer feeding it:
// conv by the input encoding, hidden by conv, output by hidden.
inline EnergyProfile measured_energy_profile(const NetworkConfig& c, const Activity& activity,
                                             const EnergyConstants& k = {}) {
  const auto layers = network_layers(c);
  std::vector<LayerEnergy> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto f = static_cast<double>(flops_ann(layers[i].second));
    out.push_back({layers[i].first, f, activity[i], flops_snn(f, activity[i])});
  }
  return energy_from_layers(std::move(out), c.time_steps, k, "measured");
}

inline void write_energy_csv(std::ostream& os, const EnergyProfile& p, const EnergyConstants& k = {}) {
  char buf[256];
  os << "layer,flops_ann,S_A,flops_snn,e_ann_nJ,e_snn_nJ,ratio,mode\n";
  for (const auto& l : p.layers) {
    const double ea = l.flops_ann * k.e_mac_pj * 1e-3;
    const double es = l.flops_snn * k.e_ac_pj * p.time_steps * 1e-3;
    std::snprintf(buf, sizeof buf, "%s,%.0f,%.6f,%.2f,%.4f,%.4f,%.4f,%s\n", l.name.c_str(), l.flops_ann,
                  l.spiking_activity, l.flops_snn, ea, es, es > 0.0 ? ea / es : 0.0, p.mode.c_str());
    os << buf;
  }
  const double fa = p.total_flops_ann();
  std::snprintf(buf, sizeof buf, "total,%.0f,%.6f,%.2f,%.4f,%.4f,%.4f,%s\n", fa,
                fa > 0.0 ? p.total_flops_snn() / fa : 0.0, p.total_flops_snn(), p.e_ann_nj, p.e_snn_nj,
                p.ratio, p.mode.c_str());
  os << buf;
}

}  // namespace nbsnn
