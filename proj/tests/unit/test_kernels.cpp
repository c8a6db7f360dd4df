#include <gtest/gtest.h>

#include "gatector/kernels/kernels.hpp"
#include "test_util.hpp"

namespace gatector {
namespace {

namespace ks = kernels::serial;
namespace kp = kernels::parallel;
using testing::max_abs_diff;
using testing::random_tensor;

struct ConvCase {
  int n, cin, cout, h, w, k, stride, pad;
};

class ConvEquivalence : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvEquivalence, ForwardAndBackwardMatchSerial) {
  const auto p = GetParam();
  std::mt19937_64 rng(p.cin * 31 + p.k);
  const Tensor x = random_tensor({p.n, p.cin, p.h, p.w}, rng);
  const Tensor w = random_tensor({p.cout, p.cin, p.k, p.k}, rng);
  const Tensor b = random_tensor({p.cout}, rng);
  const kernels::ConvGeometry g{p.stride, p.pad};

  const Tensor ys = ks::conv2d(x, w, &b, g);
  const Tensor yp = kp::conv2d(x, w, &b, g);
  ASSERT_EQ(ys.shape(), yp.shape());
  EXPECT_LT(max_abs_diff(ys, yp), 1e-4);

  const Tensor gy = random_tensor(ys.shape(), rng);
  Tensor gxs, gws, gbs, gxp, gwp, gbp;
  ks::conv2d_backward(x, w, gy, g, &gxs, &gws, &gbs);
  kp::conv2d_backward(x, w, gy, g, &gxp, &gwp, &gbp);
  EXPECT_LT(max_abs_diff(gxs, gxp), 1e-4);
  EXPECT_LT(max_abs_diff(gws, gwp), 1e-3);
  EXPECT_LT(max_abs_diff(gbs, gbp), 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvEquivalence,
                         ::testing::Values(ConvCase{2, 3, 5, 9, 9, 3, 1, 1}, ConvCase{1, 4, 6, 11, 7, 3, 2, 1},
                                           ConvCase{2, 3, 4, 16, 16, 7, 2, 3}, ConvCase{3, 8, 4, 5, 5, 1, 1, 0},
                                           ConvCase{1, 6, 2, 8, 8, 1, 2, 0}));

TEST(DeconvEquivalence, ForwardAndBackwardMatchSerial) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({2, 5, 4, 6}, rng);
  const Tensor w = random_tensor({5, 3, 4, 4}, rng);
  const Tensor b = random_tensor({3}, rng);
  const kernels::ConvGeometry g{2, 1};
  const Tensor ys = ks::conv_transpose2d(x, w, &b, g);
  const Tensor yp = kp::conv_transpose2d(x, w, &b, g);
  ASSERT_EQ(ys.shape(), (Shape{2, 3, 8, 12}));
  EXPECT_LT(max_abs_diff(ys, yp), 1e-4);

  const Tensor gy = random_tensor(ys.shape(), rng);
  Tensor gxs, gws, gbs, gxp, gwp, gbp;
  ks::conv_transpose2d_backward(x, w, gy, g, &gxs, &gws, &gbs);
  kp::conv_transpose2d_backward(x, w, gy, g, &gxp, &gwp, &gbp);
  EXPECT_LT(max_abs_diff(gxs, gxp), 1e-4);
  EXPECT_LT(max_abs_diff(gws, gwp), 1e-3);
  EXPECT_LT(max_abs_diff(gbs, gbp), 1e-3);
}

TEST(DeconvEquivalence, IsAdjointOfConvolution) {
  // <conv(x), y> == <x, deconv(y)> for a shared weight and no bias
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng);
  const Tensor w = random_tensor({4, 3, 4, 4}, rng);
  const kernels::ConvGeometry g{2, 1};
  const Tensor cx = ks::conv2d(x, w, nullptr, g);
  const Tensor y = random_tensor(cx.shape(), rng);
  const Tensor dy = ks::conv_transpose2d(y, w, nullptr, g);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < cx.size(); ++i) lhs += static_cast<double>(cx[i]) * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * dy[i];
  EXPECT_NEAR(lhs, rhs, 1e-3);
}

TEST(GroupNormEquivalence, ForwardAndBackwardMatchSerial) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({3, 8, 5, 7}, rng, -2, 3);
  const Tensor gamma = random_tensor({8}, rng);
  const Tensor beta = random_tensor({8}, rng);
  kernels::GroupNormCache cs, cp;
  const Tensor ys = ks::group_norm(x, gamma, beta, 4, 1e-5f, &cs);
  const Tensor yp = kp::group_norm(x, gamma, beta, 4, 1e-5f, &cp);
  EXPECT_LT(max_abs_diff(ys, yp), 1e-5);

  const Tensor gy = random_tensor(x.shape(), rng);
  Tensor gxs, ggs, gbs, gxp, ggp, gbp;
  ks::group_norm_backward(x, gamma, gy, 4, cs, &gxs, &ggs, &gbs);
  kp::group_norm_backward(x, gamma, gy, 4, cp, &gxp, &ggp, &gbp);
  EXPECT_LT(max_abs_diff(gxs, gxp), 1e-4);
  EXPECT_LT(max_abs_diff(ggs, ggp), 1e-4);
  EXPECT_LT(max_abs_diff(gbs, gbp), 1e-4);
}

TEST(GroupNorm, NormalizesEachGroup) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor({2, 4, 6, 6}, rng, 3, 9);
  const Tensor ones({4}, 1.0f), zeros({4}, 0.0f);
  kernels::GroupNormCache c;
  const Tensor y = kp::group_norm(x, ones, zeros, 2, 1e-5f, &c);
  for (int n = 0; n < 2; ++n)
    for (int g = 0; g < 2; ++g) {
      double s = 0, s2 = 0;
      for (int ch = 2 * g; ch < 2 * g + 2; ++ch)
        for (int i = 0; i < 36; ++i) {
          const double v = y[(static_cast<std::size_t>(n) * 4 + ch) * 36 + i];
          s += v;
          s2 += v * v;
        }
      EXPECT_NEAR(s / 72, 0.0, 1e-5);
      EXPECT_NEAR(s2 / 72, 1.0, 1e-3);
    }
}

TEST(ResizeEquivalence, ForwardAndBackwardMatchSerial) {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor({2, 3, 7, 5}, rng);
  const Tensor ys = ks::resize_bilinear(x, 16, 9);
  const Tensor yp = kp::resize_bilinear(x, 16, 9);
  EXPECT_LT(max_abs_diff(ys, yp), 1e-6);
  const Tensor gy = random_tensor(ys.shape(), rng);
  EXPECT_LT(max_abs_diff(ks::resize_bilinear_backward(gy, 7, 5), kp::resize_bilinear_backward(gy, 7, 5)), 1e-5);
}

TEST(Resize, ConstantFieldStaysConstant) {
  const Tensor x({1, 2, 5, 5}, 3.25f);
  const Tensor y = kp::resize_bilinear(x, 13, 8);
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 3.25f);
}

TEST(MaxPoolEquivalence, ForwardAndBackwardMatchSerial) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({2, 3, 8, 6}, rng);
  std::vector<int> as, ap;
  const Tensor ys = ks::max_pool2d(x, 2, 2, &as);
  const Tensor yp = kp::max_pool2d(x, 2, 2, &ap);
  EXPECT_EQ(ys, yp);
  EXPECT_EQ(as, ap);
  const Tensor gy = random_tensor(ys.shape(), rng);
  EXPECT_EQ(ks::max_pool2d_backward(gy, as, x.shape()), kp::max_pool2d_backward(gy, ap, x.shape()));
}

TEST(Gemm, AllTransposeCombinationsMatchNaive) {
  std::mt19937_64 rng(13);
  const int m = 7, n = 5, k = 9;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      const Tensor a = random_tensor(ta ? Shape{k, m} : Shape{m, k}, rng);
      const Tensor b = random_tensor(tb ? Shape{n, k} : Shape{k, n}, rng);
      Tensor c = random_tensor({m, n}, rng);
      Tensor expected = c;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int p = 0; p < k; ++p) s += (ta ? a.at(p, i) : a.at(i, p)) * (tb ? b.at(j, p) : b.at(p, j));
          expected.at(i, j) = static_cast<float>(0.5 * s + 2.0 * expected.at(i, j));
        }
      kernels::gemm(ta, tb, m, n, k, 0.5f, a.data(), b.data(), 2.0f, c.data());
      EXPECT_LT(max_abs_diff(c, expected), 1e-4) << "ta=" << ta << " tb=" << tb;
    }
}

}  // namespace
}  // namespace gatector
