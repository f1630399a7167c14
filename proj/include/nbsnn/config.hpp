#pragma once

// Run configuration: a flat "key = value" text format with [sections].
// Every key has a default; to_text() is the canonical form that gets hashed
// and copied into each run directory.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "nbsnn/checkpoint.hpp"
#include "nbsnn/dataset.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/eval.hpp"
#include "nbsnn/train.hpp"

namespace nbsnn {

struct RunConfig {
  std::string data_dir = "data";
  CensusPolicy census = CensusPolicy::strict;
  TrainConfig train;
  int mc_samples = 20;
  Setting setting = Setting::split;
  double split_ratio = 0.8;

  SettingConfig setting_config(int threads) const {
    SettingConfig s;
    s.train = train;
    s.train.threads = threads;
    s.eval.samples = mc_samples;
    s.eval.seed = train.seed;
    s.eval.threads = threads;
    s.split_ratio = split_ratio;
    return s;
  }

  void validate() const {
    train.validate();
    if (mc_samples < 1) throw ConfigError("bayes.samples must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("eval.split_ratio must lie in (0,1)");
  }

  std::string to_text() const;
  std::string hash() const { return fnv1a_hex(to_text()); }
};

namespace detail {

inline std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, p};
}

// Binds every config key to a reader and a writer.
struct ConfigField {
  std::function<void(RunConfig&, std::string_view)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <class T>
T parse_value(std::string_view key, std::string_view v) {
  T out{};
  if (!parse_number(v, out)) throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

template <class M>
ConfigField number_field(M member_of) {
  return {[member_of](RunConfig& c, std::string_view v) {
            auto& ref = member_of(c);
            ref = parse_value<std::remove_reference_t<decltype(ref)>>("", v);
          },
          [member_of](const RunConfig& c) {
            auto& ref = member_of(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<std::remove_reference_t<decltype(ref)>>) return num(ref);
            else return std::to_string(ref);
          }};
}

// Ordered (section, key) -> field table; the canonical text follows this order.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const auto fields = [] {
    std::vector<std::pair<std::string, ConfigField>> f;
    f.push_back({"data.dir", {[](RunConfig& c, std::string_view v) { c.data_dir = std::string(v); },
                              [](const RunConfig& c) { return c.data_dir; }}});
    f.push_back({"data.census",
                 {[](RunConfig& c, std::string_view v) {
                    if (v == "strict") c.census = CensusPolicy::strict;
                    else if (v == "lenient") c.census = CensusPolicy::lenient;
                    else throw ConfigError("data.census must be strict or lenient");
                  },
                  [](const RunConfig& c) {
                    return std::string(c.census == CensusPolicy::strict ? "strict" : "lenient");
                  }}});
    f.push_back({"network.conv_channels", number_field([](RunConfig& c) -> int& { return c.train.network.conv_channels; })});
    f.push_back({"network.kernel", number_field([](RunConfig& c) -> int& { return c.train.network.kernel; })});
    f.push_back({"network.same_padding",
                 {[](RunConfig& c, std::string_view v) { c.train.network.same_padding = parse_bool("network.same_padding", v); },
                  [](const RunConfig& c) { return std::string(c.train.network.same_padding ? "true" : "false"); }}});
    f.push_back({"network.hidden", number_field([](RunConfig& c) -> int& { return c.train.network.hidden; })});
    f.push_back({"network.time_steps", number_field([](RunConfig& c) -> int& { return c.train.network.time_steps; })});
    const std::pair<const char*, LifParams NetworkConfig::*> lifs[] = {
        {"lif.conv", &NetworkConfig::conv_lif}, {"lif.hidden", &NetworkConfig::hidden_lif},
        {"lif.output", &NetworkConfig::output_lif}};
    for (const auto& [sec, mem] : lifs) {
      const auto m = mem;
      f.push_back({std::string(sec) + ".gamma", number_field([m](RunConfig& c) -> double& { return (c.train.network.*m).gamma; })});
      f.push_back({std::string(sec) + ".v_thr", number_field([m](RunConfig& c) -> double& { return (c.train.network.*m).v_thr; })});
      f.push_back({std::string(sec) + ".surrogate_slope",
                   number_field([m](RunConfig& c) -> double& { return (c.train.network.*m).surrogate_slope; })});
    }
    f.push_back({"train.epochs", number_field([](RunConfig& c) -> int& { return c.train.epochs; })});
    f.push_back({"train.minibatch", number_field([](RunConfig& c) -> int& { return c.train.minibatch; })});
    f.push_back({"train.learning_rate", number_field([](RunConfig& c) -> double& { return c.train.adam.lr; })});
    f.push_back({"train.adam_beta1", number_field([](RunConfig& c) -> double& { return c.train.adam.beta1; })});
    f.push_back({"train.adam_beta2", number_field([](RunConfig& c) -> double& { return c.train.adam.beta2; })});
    f.push_back({"train.adam_epsilon", number_field([](RunConfig& c) -> double& { return c.train.adam.eps; })});
    f.push_back({"train.seed", number_field([](RunConfig& c) -> std::uint64_t& { return c.train.seed; })});
    f.push_back({"bayes.beta", number_field([](RunConfig& c) -> double& { return c.train.kl_beta; })});
    f.push_back({"bayes.samples", number_field([](RunConfig& c) -> int& { return c.mc_samples; })});
    f.push_back({"bayes.prior_mu", number_field([](RunConfig& c) -> double& { return c.train.prior.mu; })});
    f.push_back({"bayes.sigma_p", number_field([](RunConfig& c) -> double& { return c.train.prior.sigma; })});
    f.push_back({"bayes.logit_scale", number_field([](RunConfig& c) -> double& { return c.train.logit_scale; })});
    f.push_back({"bayes.rho_init", number_field([](RunConfig& c) -> double& { return c.train.rho_init; })});
    f.push_back({"eval.setting",
                 {[](RunConfig& c, std::string_view v) { c.setting = parse_setting(v); },
                  [](const RunConfig& c) { return std::string(setting_name(c.setting)); }}});
    f.push_back({"eval.split_ratio", number_field([](RunConfig& c) -> double& { return c.split_ratio; })});
    return f;
  }();
  return fields;
}

}  // namespace detail

inline std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# nbsnn run configuration\n";
  std::string current;
  for (const auto& [key, field] : detail::config_fields()) {
    const auto dot = key.rfind('.');
    const auto section = key.substr(0, dot);
    if (section != current) {
      os << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    os << key.substr(dot + 1) << " = " << field.write(*this) << '\n';
  }
  return os.str();
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  const auto& fields = detail::config_fields();
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    auto where = [&] { return "config line " + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected key = value");
    const auto key = section + "." + std::string(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) throw ConfigError(where() + "unknown key '" + key + "'");
    try {
      it->second.read(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace nbsnn
