#include <gtest/gtest.h>

#include <cmath>

#include "nbsnn/encoding.hpp"

using namespace nbsnn;

TEST(RateEncode, ZeroAndOneCells) {
  FeatureGrid g;
  g.values.fill(0.5);
  g.at(0, 0) = 0.0;
  g.at(7, 15) = 1.0;
  const auto x = rate_encode(g, 200, std::uint64_t{3});
  ASSERT_EQ(x.steps(), 200);
  for (int t = 0; t < x.steps(); ++t) {
    EXPECT_EQ(x.at(t, 0, 0), 0);
    EXPECT_EQ(x.at(t, 7, 15), 1);
  }
  for (auto s : x.data()) EXPECT_LE(s, 1);
}

TEST(RateEncode, HalfRateConverges) {
  FeatureGrid g;
  g.values.fill(0.5);
  const auto x = rate_encode(g, 10000, std::uint64_t{11});
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 16; ++c) {
      int n = 0;
      for (int t = 0; t < x.steps(); ++t) n += x.at(t, r, c);
      EXPECT_NEAR(n / 10000.0, 0.5, 0.02);
    }
}

TEST(RateEncode, SameSeedSameTrain) {
  FeatureGrid g;
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<double>(i) / 127.0;
  EXPECT_EQ(rate_encode(g, 50, std::uint64_t{9}), rate_encode(g, 50, std::uint64_t{9}));
  EXPECT_NE(rate_encode(g, 50, std::uint64_t{9}), rate_encode(g, 50, std::uint64_t{10}));
}

TEST(RateEncode, RejectsOutOfRangeGrid) {
  FeatureGrid g;
  g.at(1, 1) = 1.5;
  EXPECT_THROW(rate_encode(g, 5, std::uint64_t{1}), Error);
  g.at(1, 1) = -0.1;
  EXPECT_THROW(rate_encode(g, 5, std::uint64_t{1}), Error);
  g.at(1, 1) = 0.0;
  EXPECT_THROW(rate_encode(g, 0, std::uint64_t{1}), ShapeError);
}
