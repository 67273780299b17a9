#include <gtest/gtest.h>

#include <cmath>

#include "sdgcount/errors.hpp"
#include "sdgcount/ops.hpp"
#include "test_support.hpp"

using namespace sdgcount;
using sdgcount::test::max_grad_rel_error;
using sdgcount::test::random_tensor;

namespace {

// Weighted sum so every output element gets a distinct upstream gradient.
ag::Var probe(const ag::Var& y, const Tensor& w) { return ag::sum(ag::mul_const(y, w)); }

ag::Var param(Shape s, Rng& rng) { return ag::Var(random_tensor(std::move(s), rng), true); }

}  // namespace

TEST(Tensor, BasicReductions) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_DOUBLE_EQ(t.sum(), 21);
  EXPECT_DOUBLE_EQ(t.mean(), 3.5);
  EXPECT_DOUBLE_EQ(t.min(), 1);
  EXPECT_DOUBLE_EQ(t.max(), 6);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6);
  EXPECT_THROW(t.reshaped({4, 2, 1, 1}), ShapeError);
  EXPECT_EQ(concat_rows(t, t).dim(0), 4);
  EXPECT_EQ(slice_rows(concat_rows(t, t), 2, 2), t);
}

TEST(Autograd, ElementwiseGradients) {
  Rng rng(1);
  ag::Var a = param({2, 3, 4, 4}, rng), b = param({2, 3, 4, 4}, rng);
  const Tensor w = random_tensor({2, 3, 4, 4}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::mul(ag::add(a, b), ag::sub(a, b)), w); }, a), 1e-6);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::sigmoid(ag::scale(a, 3.0)), w); }, a), 1e-6);
  EXPECT_LT(max_grad_rel_error([&] { return ag::mean(ag::relu(a)); }, a), 1e-6);
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  ag::Var x(Tensor({1}, {3.0}), true);
  ag::Var y = ag::mul(x, x);
  ag::Var z = ag::add(y, y);
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Autograd, NoGradGuardSkipsTape) {
  ag::Var x(Tensor({1}, {2.0}), true);
  ag::NoGradGuard g;
  EXPECT_FALSE(ag::mul(x, x).requires_grad());
}

TEST(Ops, ConvMatchesDirectSum) {
  Rng rng(2);
  const Tensor x = random_tensor({1, 2, 5, 6}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor y = ag::conv2d(ag::Var(x), ag::Var(w), ag::Var(b), 1).value();
  ASSERT_EQ(y.shape(), (Shape{1, 3, 5, 6}));
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 6; ++j) {
        double acc = b[o];
        for (int c = 0; c < 2; ++c)
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
              if (i + di < 0 || i + di >= 5 || j + dj < 0 || j + dj >= 6) continue;
              acc += w.at(o, c, di + 1, dj + 1) * x.at(0, c, i + di, j + dj);
            }
        EXPECT_NEAR(y.at(0, o, i, j), acc, 1e-12);
      }
}

TEST(Ops, ConvGradients) {
  Rng rng(3);
  ag::Var x = param({2, 2, 5, 4}, rng), w = param({3, 2, 3, 3}, rng), b = param({3}, rng);
  const Tensor pw = random_tensor({2, 3, 5, 4}, rng);
  auto f = [&] { return probe(ag::conv2d(x, w, b, 1), pw); };
  EXPECT_LT(max_grad_rel_error(f, x), 1e-6);
  EXPECT_LT(max_grad_rel_error(f, w), 1e-6);
  EXPECT_LT(max_grad_rel_error(f, b), 1e-6);
  ag::Var w1 = param({3, 2, 1, 1}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::conv2d(x, w1, ag::Var(), 0), pw); }, w1), 1e-6);
}

TEST(Ops, PoolAndUpsampleGradients) {
  Rng rng(4);
  ag::Var x = param({1, 2, 4, 6}, rng);
  const Tensor w3 = random_tensor({1, 2, 2, 3}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::max_pool2(x), w3); }, x), 1e-6);
  const Tensor w8 = random_tensor({1, 2, 16, 24}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::upsample_bilinear(x, 4), w8); }, x), 1e-6);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::upsample_nearest(x, 4), w8); }, x), 1e-6);
}

TEST(Ops, BilinearPreservesMassTimesFactorSquared) {
  Rng rng(5);
  const Tensor x = random_tensor({1, 1, 5, 7}, rng, 0, 1);
  const Tensor y = ag::upsample_bilinear(ag::Var(x), 8).value();
  EXPECT_NEAR(y.sum(), 64 * x.sum(), 1e-9);
  // Constant input stays constant.
  const Tensor c = ag::upsample_bilinear(ag::Var(Tensor({1, 1, 3, 3}, 2.5)), 2).value();
  for (double v : c.values()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Ops, BilinearHalfPixelValues) {
  // 1-D ramp [0, 1] upsampled ×2: output centers at -0.25, 0.25, 0.75, 1.25 in input units.
  const Tensor y = ag::upsample_bilinear(ag::Var(Tensor({1, 1, 1, 2}, {0.0, 1.0})), 2).value();
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.25);
  EXPECT_DOUBLE_EQ(y[2], 0.75);
  EXPECT_DOUBLE_EQ(y[3], 1.0);
}

TEST(Ops, MatmulSoftmaxGradients) {
  Rng rng(6);
  ag::Var a = param({5, 4}, rng), b = param({3, 4}, rng), c = param({4, 3}, rng);
  const Tensor w = random_tensor({5, 3}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::softmax_rows(ag::matmul_nt(a, b)), w); }, a), 1e-6);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::softmax_rows(ag::matmul_nt(a, b)), w); }, b), 1e-6);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::matmul(a, c), w); }, c), 1e-6);
  const Tensor s = ag::softmax_rows(ag::matmul_nt(a, b)).value();
  for (int r = 0; r < 5; ++r) EXPECT_NEAR(s.at(r, 0) + s.at(r, 1) + s.at(r, 2), 1.0, 1e-12);
}

TEST(Ops, RowsRoundTripAndGradients) {
  Rng rng(7);
  ag::Var x = param({2, 3, 2, 2}, rng);
  const ag::Var rows = ag::to_rows(x);
  EXPECT_EQ(rows.shape(), (Shape{8, 3}));
  EXPECT_EQ(ag::from_rows(rows, 2, 2, 2).value(), x.value());
  EXPECT_DOUBLE_EQ(rows.value().at(5, 2), x.value().at(1, 2, 0, 1));
  const Tensor w = random_tensor({8, 3}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::to_rows(x), w); }, x), 1e-6);
}

TEST(Ops, ConcatSliceGradients) {
  Rng rng(8);
  ag::Var a = param({2, 2, 2, 2}, rng), b = param({2, 3, 2, 2}, rng);
  const Tensor w = random_tensor({2, 5, 2, 2}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::concat_channels(a, b), w); }, b), 1e-6);
  const Tensor w2 = random_tensor({1, 2, 2, 2}, rng);
  EXPECT_LT(max_grad_rel_error([&] { return probe(ag::slice_batch(ag::concat_batch(a, a), 3, 1), w2); }, a), 1e-6);
}

TEST(Ops, BatchNormTrainGradientsAndRunningStats) {
  Rng rng(9);
  ag::Var x = param({3, 2, 3, 3}, rng), g = param({2}, rng), b = param({2}, rng);
  ag::BatchNormStats stats{Tensor({2}, 0.0), Tensor({2}, 1.0)};
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto f = [&] { return probe(ag::batch_norm_train(x, g, b, stats, 0.1, 1e-5), w); };
  EXPECT_LT(max_grad_rel_error(f, x), 1e-5);
  EXPECT_LT(max_grad_rel_error(f, g), 1e-6);
  EXPECT_LT(max_grad_rel_error(f, b), 1e-6);

  ag::BatchNormStats fresh{Tensor({2}, 0.0), Tensor({2}, 1.0)};
  ag::batch_norm_train(x, g, b, fresh, 0.1, 1e-5);
  double mean = 0.0;
  for (int n = 0; n < 3; ++n)
    for (int i = 0; i < 9; ++i) mean += x.value()[n * 18 + i];
  mean /= 27;
  EXPECT_NEAR(fresh.running_mean[0], 0.1 * mean, 1e-12);
}

TEST(Ops, ShapeErrors) {
  ag::Var a(Tensor({2, 3})), b(Tensor({3, 2}));
  EXPECT_THROW(ag::add(a, b), ShapeError);
  EXPECT_THROW(ag::max_pool2(ag::Var(Tensor({1, 1, 3, 4}))), ShapeError);
}
