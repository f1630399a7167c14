#include <gtest/gtest.h>

#include "gradcheck.hpp"

using namespace nbsnn;

TEST(Bptt, SoftModeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto prob = fixtures::random_problem(seed);
    const double err = fixtures::relative_error(prob.analytic(), prob.numeric());
    EXPECT_LT(err, 1e-3) << "seed " << seed;
  }
}

TEST(Bptt, EveryTensorReceivesGradient) {
  const auto g = fixtures::random_problem(3).analytic();
  g.for_each_tensor([](std::string_view name, const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    EXPECT_GT(n, 1e-12) << name;
  });
}

TEST(Bptt, ElboGradientThroughOneSampleMatchesFiniteDifferences) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto prob = fixtures::random_problem(seed, 0.05);
    const double err = fixtures::relative_error(prob.analytic(), prob.numeric());
    EXPECT_LT(err, 1e-3) << "seed " << seed;
  }
}

TEST(Bptt, ZeroInputZeroTargetSignalGivesZeroGradients) {
  NetworkConfig c;
  c.time_steps = 10;
  Network<float> net(c, NetworkParams<float>::init(c, 5, -5.0));
  SpikeTrain x(c.time_steps);
  Trace<float> tr;
  const auto mean = mean_weights(net.params().out_w);
  net.forward(x, mean.w, net.params().out_b.mu, SpikeMode::hard, tr);
  auto grad = NetworkParams<float>::zeros(c);
  std::vector<float> d_counts(6, 0.0f), dw(mean.w.size(), 0.0f), db(6, 0.0f);
  net.backward(tr, d_counts, mean.w, grad, dw, db);
  EXPECT_EQ(grad, NetworkParams<float>::zeros(c));
  for (float v : dw) EXPECT_EQ(v, 0.0f);
}

TEST(Bptt, MissingTraceRejected) {
  NetworkConfig c;
  Network<float> net(c, NetworkParams<float>::zeros(c));
  Trace<float> tr;
  auto grad = NetworkParams<float>::zeros(c);
  std::vector<float> d(6), w(c.hidden * 6), dw(w.size()), db(6);
  EXPECT_THROW(net.backward(tr, d, w, grad, dw, db), Error);
}

TEST(Bptt, FloatAndDoublePathsAgreeInHardMode) {
  const auto prob = fixtures::random_problem(42);
  Network<double> nd(prob.cfg, prob.params);
  Network<float> nf(prob.cfg, prob.params.cast<float>());
  const auto dd = prob.draw(prob.params);
  std::vector<float> wf(dd.w.w.begin(), dd.w.w.end()), bf(dd.b.w.begin(), dd.b.w.end());
  const auto a = nd.forward(prob.input, dd.w.w, dd.b.w);
  const auto b = nf.forward(prob.input, wf, bf);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(a.counts[k], static_cast<double>(b.counts[k]));
}
