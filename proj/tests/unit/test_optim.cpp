#include <gtest/gtest.h>

#include <cmath>

#include "sdgcount/errors.hpp"
#include "sdgcount/optim.hpp"

using namespace sdgcount;

TEST(AdamW, ZeroGradientDecaysExactly) {
  ag::Var w(Tensor({3}, {1.0, -2.0, 4.0}), true);
  nn::ParameterSet ps;
  ps.add("w", w);
  AdamW opt(ps, AdamWConfig{0.9, 0.999, 1e-8, 1e-2});
  const double lr = 0.1;
  Tensor expect = w.value();
  for (int step = 0; step < 5; ++step) {
    w.node()->grad = Tensor({3}, 0.0);
    opt.step(lr);
    expect *= 1.0 - lr * 1e-2;
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(w.value()[i], expect[i]);
  }
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  // Bias-corrected first step is lr·sign(g) (up to eps) when weight decay is 0.
  ag::Var w(Tensor({2}, {0.5, 0.5}), true);
  nn::ParameterSet ps;
  ps.add("w", w);
  AdamW opt(ps, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  w.node()->grad = Tensor({2}, {3.0, -0.01});
  opt.step(0.01);
  EXPECT_NEAR(w.value()[0], 0.49, 1e-8);
  EXPECT_NEAR(w.value()[1], 0.51, 1e-6);
  EXPECT_EQ(opt.slots()[0].steps, 1);
}

TEST(AdamW, SkipsParametersWithoutGradient) {
  ag::Var w(Tensor({1}, {1.0}), true);
  nn::ParameterSet ps;
  ps.add("w", w);
  AdamW opt(ps, AdamWConfig{});
  opt.step(0.1);
  EXPECT_EQ(w.value()[0], 1.0);
  EXPECT_EQ(opt.slots()[0].steps, 0);
}

TEST(OneCycle, WarmupPeakAndAnneal) {
  const OneCycleLR s(1e-3, 1000, 0.3, 25.0, 1e4);
  EXPECT_EQ(s.peak_step(), 299);
  EXPECT_LT(s.lr_at(0), 1e-3);
  EXPECT_DOUBLE_EQ(s.lr_at(0), 1e-3 / 25);
  EXPECT_NEAR(s.lr_at(s.peak_step()), 1e-3, 1e-9);
  EXPECT_NEAR(s.lr_at(999), 1e-7, 1e-15);
  for (std::int64_t t = 1; t <= s.peak_step(); ++t) EXPECT_GE(s.lr_at(t), s.lr_at(t - 1));
  for (std::int64_t t = s.peak_step() + 1; t < 1000; ++t) EXPECT_LE(s.lr_at(t), s.lr_at(t - 1));
  EXPECT_THROW(OneCycleLR(1e-3, 0), ConfigError);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  ag::Var a(Tensor({2}), true), b(Tensor({1}), true);
  nn::ParameterSet ps;
  ps.add("a", a);
  ps.add("b", b);
  a.node()->grad = Tensor({2}, {3.0, 0.0});
  b.node()->grad = Tensor({1}, {4.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-12);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-12);
  EXPECT_NEAR(clip_grad_norm(ps, 10.0), 1.0, 1e-12);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-12);
}
