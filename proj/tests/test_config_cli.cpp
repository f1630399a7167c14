#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbsnn/checkpoint.hpp"
#include "nbsnn/config.hpp"
#include "synthetic.hpp"

using namespace nbsnn;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const auto capture = fs::temp_directory_path() / "nbsnn_cli_stdout.txt";
  const std::string cmd = std::string(NBSNN_CLI_PATH) + " " + args + " > " + capture.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(capture);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("nbsnn_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small synthetic dataset plus a matching fast config, shared by the CLI tests.
struct Fixture {
  fs::path root = fresh_dir("fixture");
  fs::path data = root / "data";
  fs::path config = root / "run.ini";

  Fixture() {
    fs::create_directories(data);
    fixtures::SyntheticDrift gen;
    fixtures::write_dataset(data, gen.dataset(fixtures::uniform_counts(3), 5));
    RunConfig c;
    c.data_dir = data.string();
    c.census = CensusPolicy::lenient;
    c.train.epochs = 2;
    c.train.network.time_steps = 8;
    c.mc_samples = 2;
    std::ofstream(config) << c.to_text();
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const auto back = parse_config(d.to_text());
  EXPECT_EQ(back.to_text(), d.to_text());
  EXPECT_EQ(back.hash(), d.hash());
  EXPECT_EQ(back.train.network, d.train.network);
  EXPECT_EQ(back.train.epochs, 50);
  EXPECT_EQ(back.mc_samples, 20);
  EXPECT_EQ(back.train.network.time_steps, 50);
}

TEST(Config, ValuesAreRead) {
  const auto c = parse_config(
      "# comment\n[train]\nepochs = 7\nlearning_rate = 0.01\n\n[bayes]\nsamples = 5\n"
      "[lif.hidden]\ngamma = 0.8\n[eval]\nsetting = long\n[data]\ncensus = lenient\n");
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.train.adam.lr, 0.01);
  EXPECT_EQ(c.mc_samples, 5);
  EXPECT_EQ(c.train.network.hidden_lif.gamma, 0.8);
  EXPECT_EQ(c.setting, Setting::long_term);
  EXPECT_EQ(c.census, CensusPolicy::lenient);
  EXPECT_NE(c.hash(), RunConfig{}.hash());
  EXPECT_EQ(parse_config(c.to_text()).to_text(), c.to_text());
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("[train]\nepochz = 3\n").find("config line 2"), std::string::npos);
  EXPECT_NE(message("[train]\nepochz = 3\n").find("train.epochz"), std::string::npos);
  EXPECT_NE(message("[train]\n\nepochs = three\n").find("config line 3"), std::string::npos);
  EXPECT_NE(message("[train\n").find("config line 1"), std::string::npos);
  EXPECT_NE(message("[train]\nepochs\n").find("config line 2"), std::string::npos);
  EXPECT_THROW(parse_config("[train]\nepochs = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[lif.conv]\ngamma = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[eval]\nsplit_ratio = 1\n"), ConfigError);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("--bogus").code, 2);
  EXPECT_EQ(run_cli("eval --setting nope --out /tmp/x").code, 2);
  EXPECT_EQ(run_cli("ingest --data " + (fixture().root / "missing").string()).code, 1);
  EXPECT_EQ(run_cli("ingest --check --data " + fixture().data.string()).code, 1);
  const auto ok = run_cli("ingest --data " + fixture().data.string());
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("all,180,30,30,30,30,30,30"), std::string::npos) << ok.out;
}

TEST(Cli, PrintDefaultsParses) {
  const auto r = run_cli("--print-defaults");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(parse_config(r.out).to_text(), RunConfig{}.to_text());
}

TEST(Cli, GoldenEnergy) {
  const auto out = fresh_dir("energy");
  const auto r = run_cli("energy --golden --out " + out.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("total,482304,"), std::string::npos);
  EXPECT_NE(r.out.find(",1543.3728,626.2700,2.4644,golden"), std::string::npos) << r.out;
  EXPECT_EQ(read_file(out / "energy.csv"), r.out);
}

TEST(Cli, ShortTermEvalIsReproducible) {
  const auto a = fresh_dir("eval_a"), b = fresh_dir("eval_b");
  const std::string common = "eval --setting short --config " + fixture().config.string() + " --threads 2 --out ";
  ASSERT_EQ(run_cli(common + a.string()).code, 0);
  ASSERT_EQ(run_cli(common + b.string()).code, 0);

  const auto csv = read_file(a / "report_short.csv");
  std::istringstream is(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines.front(), "pair,accuracy,reference,delta");
  EXPECT_EQ(lines[1].rfind("1-2,", 0), 0u);
  EXPECT_EQ(lines.back().rfind("avg,", 0), 0u);

  for (const auto* name : {"report_short.csv", "report_short.svg", "confusion_1-2.csv", "confusion_9-10.csv",
                           "loss_1-2.csv", "config.ini"})
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  EXPECT_EQ(parse_config(read_file(a / "config.ini")).setting, Setting::short_term);

  ASSERT_EQ(run_cli("report --out " + a.string()).code, 0);
  const auto md = read_file(a / "report.md");
  EXPECT_NE(md.find("## report_short.csv"), std::string::npos);
  EXPECT_NE(md.find("| pair | accuracy | reference | delta |"), std::string::npos);
}

TEST(Cli, TrainWritesCheckpointAndMeasuredEnergy) {
  const auto out = fresh_dir("train");
  ASSERT_EQ(run_cli("train --config " + fixture().config.string() + " --out " + out.string()).code, 0);
  const auto cfg = parse_config(read_file(out / "config.ini"));
  const auto ck = load_checkpoint(out / "checkpoint.bin", cfg.hash());
  EXPECT_EQ(ck.meta.epoch, 2);
  EXPECT_EQ(ck.model.net.config(), cfg.train.network);
  EXPECT_TRUE(fs::exists(out / "loss_curve.csv"));

  const auto r = run_cli("energy --checkpoint " + (out / "checkpoint.bin").string() + " --data " +
                         fixture().data.string() + " --limit 12 --out " + out.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\nconv,9216,"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find(",measured\n"), std::string::npos);
}

TEST(Cli, DataFlagBeatsEnvironment) {
  const auto out = fresh_dir("env");
  ::setenv("GAS_DRIFT_DATA", (fixture().root / "nowhere").c_str(), 1);
  EXPECT_EQ(run_cli("ingest").code, 1);
  EXPECT_EQ(run_cli("ingest --data " + fixture().data.string()).code, 0);
  ::setenv("GAS_DRIFT_DATA", fixture().data.c_str(), 1);
  EXPECT_EQ(run_cli("ingest").code, 0);
  ::unsetenv("GAS_DRIFT_DATA");
}
