#pragma once

// Checkpoint file: one JSON manifest line, then every parameter tensor in
// declared order as raw little-endian float32.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/model.hpp"

namespace nbsnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "nbsnn-checkpoint";

struct CheckpointMeta {
  std::string config_hash;
  int epoch = 0;
  std::map<std::string, double> metrics;
};

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
};

// FNV-1a, 64-bit, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline nlohmann::ordered_json lif_to_json(const LifParams& p) {
  return {{"gamma", p.gamma}, {"v_thr", p.v_thr}, {"surrogate_slope", p.surrogate_slope}};
}

inline LifParams lif_from_json(const nlohmann::ordered_json& j) {
  return {j.at("gamma").get<double>(), j.at("v_thr").get<double>(),
          j.at("surrogate_slope").get<double>()};
}

inline std::vector<std::size_t> tensor_shape(std::string_view name, const NetworkConfig& c) {
  const auto k = static_cast<std::size_t>(c.kernel);
  const auto h = static_cast<std::size_t>(c.hidden);
  const auto o = static_cast<std::size_t>(c.classes);
  if (name == "conv.weight") return {static_cast<std::size_t>(c.conv_channels), 1, k, k};
  if (name == "conv.bias") return {static_cast<std::size_t>(c.conv_channels)};
  if (name == "hidden.weight") return {c.conv_neurons(), h};
  if (name == "hidden.bias") return {h};
  if (name == "output.weight.mu" || name == "output.weight.rho") return {h, o};
  return {o};
}

inline void put_f32_le(std::string& out, float f) {
  auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
}

inline float get_f32_le(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace detail

inline std::string serialize_checkpoint(const Model& model, const CheckpointMeta& meta) {
  using nlohmann::ordered_json;
  const auto& c = model.net.config();
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = meta.config_hash;
  j["epoch"] = meta.epoch;
  j["metrics"] = ordered_json::object();
  for (const auto& [k, v] : meta.metrics) j["metrics"][k] = v;
  j["network"] = {{"conv_channels", c.conv_channels}, {"kernel", c.kernel},
                  {"same_padding", c.same_padding},   {"hidden", c.hidden},
                  {"classes", c.classes},             {"time_steps", c.time_steps},
                  {"lif", {{"conv", detail::lif_to_json(c.conv_lif)},
                           {"hidden", detail::lif_to_json(c.hidden_lif)},
                           {"output", detail::lif_to_json(c.output_lif)}}}};
  j["prior"] = {{"mu", model.prior.mu}, {"sigma", model.prior.sigma}};
  j["logit_scale"] = model.logit_scale;
  j["stats"] = {{"min", model.stats.min}, {"max", model.stats.max}};
  j["arrays"] = ordered_json::array();
  std::string blob;
  model.net.params().for_each_tensor([&](std::string_view name, const std::vector<float>& v) {
    j["arrays"].push_back({{"name", name}, {"shape", detail::tensor_shape(name, c)}, {"count", v.size()}});
    for (float f : v) detail::put_f32_le(blob, f);
  });
  return j.dump() + "\n" + blob;
}

inline LoadedCheckpoint parse_checkpoint(const std::string& bytes,
                                         const std::optional<std::string>& expected_hash = {}) {
  using nlohmann::ordered_json;
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw CheckpointError("checkpoint: missing manifest line");
  ordered_json j;
  try {
    j = ordered_json::parse(bytes.substr(0, nl));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt manifest: ") + e.what());
  }
  LoadedCheckpoint out{Model{Network<float>(NetworkConfig{}, NetworkParams<float>::zeros(NetworkConfig{})),
                             {}, {}, 1.0},
                       {}};
  NetworkConfig cfg;
  NetworkParams<float> params;
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw CheckpointError("checkpoint: unknown format");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    out.meta.config_hash = j.at("config_hash").get<std::string>();
    out.meta.epoch = j.at("epoch").get<int>();
    for (const auto& [k, v] : j.at("metrics").items()) out.meta.metrics[k] = v.get<double>();
    const auto& n = j.at("network");
    cfg.conv_channels = n.at("conv_channels").get<int>();
    cfg.kernel = n.at("kernel").get<int>();
    cfg.same_padding = n.at("same_padding").get<bool>();
    cfg.hidden = n.at("hidden").get<int>();
    cfg.classes = n.at("classes").get<int>();
    cfg.time_steps = n.at("time_steps").get<int>();
    cfg.conv_lif = detail::lif_from_json(n.at("lif").at("conv"));
    cfg.hidden_lif = detail::lif_from_json(n.at("lif").at("hidden"));
    cfg.output_lif = detail::lif_from_json(n.at("lif").at("output"));
    cfg.validate();
    out.model.prior = {j.at("prior").at("mu").get<double>(), j.at("prior").at("sigma").get<double>()};
    out.model.logit_scale = j.at("logit_scale").get<double>();
    out.model.stats.min = j.at("stats").at("min").get<std::array<double, kFeatures>>();
    out.model.stats.max = j.at("stats").at("max").get<std::array<double, kFeatures>>();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt manifest: ") + e.what());
  }
  if (expected_hash && *expected_hash != out.meta.config_hash)
    throw CheckpointError("checkpoint: config hash mismatch (file " + out.meta.config_hash + ", expected " +
                          *expected_hash + ")");

  params = NetworkParams<float>::zeros(cfg);
  const auto& arrays = j.at("arrays");
  std::size_t k = 0, offset = nl + 1;
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  params.for_each_tensor([&](std::string_view name, std::vector<float>& v) {
    if (k >= arrays.size()) throw CheckpointError("checkpoint: manifest lists too few arrays");
    const auto& a = arrays[k++];
    if (a.at("name").get<std::string>() != name || a.at("count").get<std::size_t>() != v.size())
      throw CheckpointError("checkpoint: array '" + std::string(name) + "' does not match the network");
    if (bytes.size() < offset + 4 * v.size()) throw CheckpointError("checkpoint: truncated array data");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::get_f32_le(data + offset + 4 * i);
    offset += 4 * v.size();
  });
  if (k != arrays.size()) throw CheckpointError("checkpoint: manifest lists extra arrays");
  if (offset != bytes.size()) throw CheckpointError("checkpoint: trailing bytes after array data");
  out.model.net = Network<float>(cfg, std::move(params));
  return out;
}

// Writes to a temporary sibling and renames into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                            const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model, meta));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                        const std::optional<std::string>& expected_hash = {}) {
  return parse_checkpoint(read_file(path), expected_hash);
}

}  // namespace nbsnn
