// nbsnn: dataset census, training, drift evaluation and energy reports for
// the spiking Bayesian gas classifier.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nbsnn/nbsnn.hpp"

namespace fs = std::filesystem;
using namespace nbsnn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kDataEnv = "GAS_DRIFT_DATA";

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return parse_config(read_file(path));
}

// --data beats the environment, which beats the config file.
void resolve_data_dir(RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) cfg.data_dir = flag;
  else if (const char* env = std::getenv(kDataEnv); env && *env) cfg.data_dir = env;
}

template <class F>
void write_output(const fs::path& path, F&& render) {
  std::ostringstream os;
  render(os);
  write_file_atomic(path, os.str());
}

void write_census(std::ostream& os, const std::array<BatchCensus, kBatches>& census) {
  os << "batch,total";
  for (auto n : kClassNames) os << ',' << n;
  os << '\n';
  BatchCensus all;
  for (const auto& c : census) {
    os << c.batch << ',' << c.total;
    for (auto v : c.per_class) os << ',' << v;
    os << '\n';
    all.total += c.total;
    for (std::size_t k = 0; k < kClasses; ++k) all.per_class[k] += c.per_class[k];
  }
  os << "all," << all.total;
  for (auto v : all.per_class) os << ',' << v;
  os << '\n';
}

int cmd_ingest(const std::string& data_flag, bool check) {
  RunConfig cfg;
  resolve_data_dir(cfg, data_flag);
  const auto ds = load_dataset(cfg.data_dir, CensusPolicy::lenient);
  std::array<BatchCensus, kBatches> census;
  for (int b = 1; b <= kBatches; ++b)
    census[static_cast<std::size_t>(b - 1)] = census_of(b, ds[static_cast<std::size_t>(b - 1)]);
  write_census(std::cout, census);
  if (check) {
    std::size_t total = 0;
    for (const auto& c : census) {
      check_census(c);
      total += static_cast<std::size_t>(c.total);
    }
    if (total != kExpectedTotal)
      throw CensusError("total " + std::to_string(total) + " != " + std::to_string(kExpectedTotal));
    std::cerr << "census ok: " << total << " samples\n";
  }
  return 0;
}

// Training set used by `train`: the split protocol's training side, or
// batch 1 for the drift protocols.
std::vector<GasSample> training_set(const RunConfig& cfg, const Dataset& ds) {
  if (cfg.setting == Setting::split) return random_split(pool_all(ds), cfg.split_ratio, cfg.train.seed).train;
  return ds[0];
}

int cmd_train(const std::string& config_path, const std::string& data_flag, const fs::path& out, int threads) {
  auto cfg = load_run_config(config_path);
  resolve_data_dir(cfg, data_flag);
  fs::create_directories(out);
  write_file_atomic(out / "config.ini", cfg.to_text());
  const auto ds = load_dataset(cfg.data_dir, cfg.census);
  const auto samples = training_set(cfg, ds);
  auto tc = cfg.train;
  tc.threads = threads;
  std::cerr << "training on " << samples.size() << " samples, " << tc.epochs << " epochs\n";
  auto result = train(tc, samples, [](const EpochStats& e) {
    std::cerr << "epoch " << e.epoch << " loss " << e.loss << " train_acc " << e.train_acc << "\n";
  });
  CheckpointMeta meta{cfg.hash(), tc.epochs, {}};
  if (!result.curve.empty()) {
    meta.metrics["loss"] = result.curve.back().loss;
    meta.metrics["train_acc"] = result.curve.back().train_acc;
  }
  save_checkpoint(result.model, meta, out / "checkpoint.bin");
  write_output(out / "loss_curve.csv", [&](std::ostream& os) { write_loss_curve_csv(os, result.curve); });
  std::cerr << "wrote " << (out / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& setting, const std::string& config_path, const std::string& data_flag,
             const fs::path& out, int threads) {
  auto cfg = load_run_config(config_path);
  if (!setting.empty()) cfg.setting = parse_setting(setting);
  resolve_data_dir(cfg, data_flag);
  fs::create_directories(out);
  write_file_atomic(out / "config.ini", cfg.to_text());
  const auto ds = load_dataset(cfg.data_dir, cfg.census);
  const auto result = run_setting(cfg.setting, cfg.setting_config(threads), ds,
                                  [](const std::string& s) { std::cerr << s << "\n"; });
  const std::string name(setting_name(cfg.setting));
  write_output(out / ("report_" + name + ".csv"), [&](std::ostream& os) { write_report_csv(os, result); });
  write_output(out / ("report_" + name + ".svg"), [&](std::ostream& os) { write_report_svg(os, result); });
  for (const auto& r : result.reports)
    write_output(out / ("confusion_" + r.pair + ".csv"), [&](std::ostream& os) { write_confusion_csv(os, r); });
  for (std::size_t i = 0; i < result.curves.size(); ++i) {
    const std::string tag = result.curves.size() == 1 ? name : result.reports[i].pair;
    write_output(out / ("loss_" + tag + ".csv"),
                 [&](std::ostream& os) { write_loss_curve_csv(os, result.curves[i]); });
  }
  for (const auto& r : result.reports)
    std::cerr << r.pair << ": " << r.accuracy << "%\n";
  std::cerr << "avg: " << result.average << "%\n";
  return 0;
}

int cmd_energy(bool golden, const std::string& checkpoint, const std::string& data_flag, const fs::path& out,
               std::uint64_t seed, long limit) {
  EnergyProfile profile;
  if (golden) {
    profile = golden_energy_profile();
  } else {
    const auto ck = load_checkpoint(checkpoint);
    RunConfig cfg;
    resolve_data_dir(cfg, data_flag);
    auto pool = pool_all(load_dataset(cfg.data_dir, CensusPolicy::lenient));
    if (limit > 0 && pool.size() > static_cast<std::size_t>(limit)) {
      std::vector<GasSample> sub;
      const double stride = static_cast<double>(pool.size()) / static_cast<double>(limit);
      for (long i = 0; i < limit; ++i) sub.push_back(pool[static_cast<std::size_t>(i * stride)]);
      pool = std::move(sub);
    }
    const auto act = measure_activity(ck.model, pool, seed);
    profile = measured_energy_profile(ck.model.net.config(), act);
  }
  fs::create_directories(out);
  write_output(out / "energy.csv", [&](std::ostream& os) { write_energy_csv(os, profile); });
  write_energy_csv(std::cout, profile);
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int cmd_report(const fs::path& out) {
  if (!fs::is_directory(out)) throw Error("no such directory: " + out.string());
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  std::ostringstream md;
  md << "# Run summary: " << out.filename().string() << "\n";
  for (const auto& p : csvs) {
    std::ifstream in(p);
    std::string line;
    bool header = true;
    md << "\n## " << p.filename().string() << "\n\n";
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      md << '|';
      for (const auto& c : cells) md << ' ' << c << " |";
      md << '\n';
      if (header) {
        md << '|';
        for (std::size_t i = 0; i < cells.size(); ++i) md << "---|";
        md << '\n';
        header = false;
      }
    }
  }
  write_file_atomic(out / "report.md", md.str());
  std::cout << md.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking Bayesian gas classifier: ingest, train, eval, energy, report"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default run configuration and exit");

  std::string data_dir, config_path, setting, checkpoint;
  std::string out_dir = "out";
  bool check = false, golden = false;
  int threads = 1;
  std::uint64_t seed = 42;
  long limit = 0;

  auto* ingest = app.add_subcommand("ingest", "Parse the batch files and print the census as CSV");
  ingest->add_option("--data", data_dir, std::string("Dataset directory (default: $") + kDataEnv + ")");
  ingest->add_flag("--check", check, "Exit nonzero unless the census matches the published counts");

  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint and loss curve");
  train_cmd->add_option("--config", config_path, "Run configuration file");
  train_cmd->add_option("--data", data_dir, "Dataset directory");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "Run an evaluation setting and write reports");
  eval_cmd->add_option("--setting", setting, "split | short | long")
      ->check(CLI::IsMember({"split", "short", "long"}));
  eval_cmd->add_option("--config", config_path, "Run configuration file");
  eval_cmd->add_option("--data", data_dir, "Dataset directory");
  eval_cmd->add_option("--out", out_dir, "Output directory")->required();
  eval_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* energy_cmd = app.add_subcommand("energy", "Write energy.csv (golden or measured mode)");
  auto* golden_opt = energy_cmd->add_flag("--golden", golden, "Use the published FLOPS totals");
  auto* ck_opt = energy_cmd->add_option("--checkpoint", checkpoint, "Checkpoint for measured mode");
  energy_cmd->add_option("--data", data_dir, "Dataset directory for measured mode");
  energy_cmd->add_option("--out", out_dir, "Output directory")->required();
  energy_cmd->add_option("--seed", seed, "Seed for encoding and weight draws");
  energy_cmd->add_option("--limit", limit, "Measure on at most this many samples (0 = all)");
  golden_opt->excludes(ck_opt);

  auto* report_cmd = app.add_subcommand("report", "Combine every CSV in a run directory into markdown");
  report_cmd->add_option("--out", out_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (print_defaults) {
      std::cout << RunConfig{}.to_text();
      return 0;
    }
    if (*ingest) return cmd_ingest(data_dir, check);
    if (*train_cmd) return cmd_train(config_path, data_dir, out_dir, threads);
    if (*eval_cmd) return cmd_eval(setting, config_path, data_dir, out_dir, threads);
    if (*energy_cmd) {
      if (!golden && checkpoint.empty()) {
        std::cerr << "energy: need --golden or --checkpoint FILE\n" << energy_cmd->help();
        return kExitUsage;
      }
      return cmd_energy(golden, checkpoint, data_dir, out_dir, seed, limit);
    }
    if (*report_cmd) return cmd_report(out_dir);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
