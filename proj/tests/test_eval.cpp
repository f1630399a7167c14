#include <gtest/gtest.h>

#include <sstream>

#include "nbsnn/eval.hpp"
#include "synthetic.hpp"

using namespace nbsnn;

namespace {

SettingConfig quick_config() {
  SettingConfig c;
  c.train.epochs = 3;
  c.train.minibatch = 8;
  c.train.network.time_steps = 10;
  c.eval.samples = 3;
  return c;
}

Dataset small_dataset() {
  fixtures::SyntheticDrift gen;
  return gen.dataset(fixtures::uniform_counts(3), 11);
}

// Parses the body of a confusion CSV back into counts.
Confusion read_confusion(const std::string& csv) {
  Confusion m{};
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  for (std::size_t t = 0; t < kClasses; ++t) {
    std::getline(is, line);
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    for (std::size_t p = 0; p < kClasses; ++p) {
      std::getline(row, cell, ',');
      m[t][p] = std::stol(cell);
    }
  }
  return m;
}

}  // namespace

TEST(Eval, ConvergedModelScoresPerfectOnItsTrainingSet) {
  fixtures::SyntheticDrift gen;
  const auto data = gen.batch(1, {10, 10, 10, 10, 10, 10}, 21);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.minibatch = 16;
  const auto tr = train(cfg, data);
  ASSERT_EQ(tr.curve.back().train_acc, 100.0);
  const auto rep = evaluate(tr.model, data, {});
  EXPECT_EQ(rep.accuracy, 100.0);
  EXPECT_EQ(rep.correct(), rep.total);
}

TEST(Eval, SingleClassTestSet) {
  fixtures::SyntheticDrift gen;
  const auto data = gen.batch(1, {4, 4, 4, 4, 4, 4}, 2);
  auto cfg = quick_config();
  const auto tr = train(cfg.train, data);
  const auto test = gen.batch(2, {0, 0, 5, 0, 0, 0}, 3);
  const auto rep = evaluate(tr.model, test, cfg.eval);
  long row = 0;
  for (std::size_t t = 0; t < kClasses; ++t)
    for (std::size_t p = 0; p < kClasses; ++p) {
      if (t != 2) EXPECT_EQ(rep.confusion[t][p], 0);
      else row += rep.confusion[t][p];
    }
  EXPECT_EQ(row, 5);
  const auto pc = rep.per_class_accuracy();
  for (std::size_t k = 0; k < kClasses; ++k) EXPECT_EQ(pc[k].has_value(), k == 2);
  EXPECT_DOUBLE_EQ(*pc[2], rep.accuracy);
}

TEST(Eval, AccuracyMatchesConfusionCsv) {
  fixtures::SyntheticDrift gen;
  const auto data = gen.batch(1, {5, 5, 5, 5, 5, 5}, 4);
  auto cfg = quick_config();
  const auto tr = train(cfg.train, data);
  const auto test = gen.batch(5, {3, 4, 5, 6, 7, 8}, 5);
  const auto rep = evaluate(tr.model, test, cfg.eval);
  std::ostringstream os;
  write_confusion_csv(os, rep);
  const auto m = read_confusion(os.str());
  long diag = 0, total = 0;
  for (std::size_t t = 0; t < kClasses; ++t)
    for (std::size_t p = 0; p < kClasses; ++p) {
      total += m[t][p];
      if (t == p) diag += m[t][p];
    }
  EXPECT_EQ(total, static_cast<long>(test.size()));
  EXPECT_DOUBLE_EQ(rep.accuracy, 100.0 * static_cast<double>(diag) / static_cast<double>(total));
  EXPECT_GE(rep.accuracy, 0.0);
  EXPECT_LE(rep.accuracy, 100.0);
  EXPECT_GE(rep.mean_entropy, 0.0);
  EXPECT_LE(rep.mean_entropy, std::log(6.0) + 1e-12);
}

TEST(Eval, ShortTermShape) {
  const auto r = run_setting(Setting::short_term, quick_config(), small_dataset());
  ASSERT_EQ(r.reports.size(), 9u);
  EXPECT_EQ(r.curves.size(), 9u);
  double sum = 0.0;
  for (int i = 0; i < 9; ++i) {
    const auto& rep = r.reports[static_cast<std::size_t>(i)];
    EXPECT_EQ(rep.train_batch, i + 1);
    EXPECT_EQ(rep.test_batch, i + 2);
    EXPECT_EQ(rep.pair, std::to_string(i + 1) + "-" + std::to_string(i + 2));
    EXPECT_EQ(*rep.reference, kShortTermReference[static_cast<std::size_t>(i)]);
    EXPECT_GE(rep.accuracy, 0.0);
    EXPECT_LE(rep.accuracy, 100.0);
    sum += rep.accuracy;
  }
  EXPECT_DOUBLE_EQ(r.average, sum / 9.0);
  EXPECT_EQ(*r.reference_average, 88.12);

  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 11);  // header, 9 pairs, avg
  EXPECT_NE(os.str().find("\navg,"), std::string::npos);
}

TEST(Eval, LongTermTrainsOnceOnBatchOne) {
  const auto r = run_setting(Setting::long_term, quick_config(), small_dataset());
  ASSERT_EQ(r.reports.size(), 9u);
  EXPECT_EQ(r.curves.size(), 1u);
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(r.reports[static_cast<std::size_t>(i)].train_batch, 1);
    EXPECT_EQ(r.reports[static_cast<std::size_t>(i)].test_batch, i + 2);
  }
  EXPECT_EQ(*r.reference_average, 84.20);
}

TEST(Eval, SplitSettingAndDeterminism) {
  const auto ds = small_dataset();
  const auto a = run_setting(Setting::split, quick_config(), ds);
  ASSERT_EQ(a.reports.size(), 1u);
  EXPECT_EQ(a.reports[0].pair, "split");
  EXPECT_EQ(a.reports[0].total, 36);  // 20% of 180, stratified per class
  const auto b = run_setting(Setting::split, quick_config(), ds);
  EXPECT_EQ(a.reports[0].confusion, b.reports[0].confusion);
  std::ostringstream sa, sb;
  write_report_svg(sa, a);
  write_report_svg(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Eval, ThreadedEvaluationMatchesSerial) {
  fixtures::SyntheticDrift gen;
  const auto data = gen.batch(1, {4, 4, 4, 4, 4, 4}, 6);
  auto cfg = quick_config();
  const auto tr = train(cfg.train, data);
  const auto serial = evaluate(tr.model, data, cfg.eval);
  cfg.eval.threads = 4;
  const auto threaded = evaluate(tr.model, data, cfg.eval);
  EXPECT_EQ(serial.confusion, threaded.confusion);
  EXPECT_EQ(serial.mean_entropy, threaded.mean_entropy);
}

TEST(Eval, SettingNames) {
  EXPECT_EQ(parse_setting("short"), Setting::short_term);
  EXPECT_EQ(parse_setting("long"), Setting::long_term);
  EXPECT_EQ(parse_setting("split"), Setting::split);
  EXPECT_THROW(parse_setting("medium"), Error);
  EXPECT_THROW(evaluate(Model{Network<float>(NetworkConfig{}, NetworkParams<float>::zeros(NetworkConfig{})), {}, {}, 1.0},
                        std::span<const GasSample>{}, {}),
               Error);
}
