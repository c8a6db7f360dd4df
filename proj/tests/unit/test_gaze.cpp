#include <gtest/gtest.h>

#include <cmath>

#include "gatector/gaze/gaze_head.hpp"
#include "gatector/losses/gaze_losses.hpp"
#include "test_util.hpp"

namespace gatector {
namespace {

using testing::random_tensor;

GazeHeadConfig small_head() {
  GazeHeadConfig c;
  c.image_size = 64;
  c.feature_channels = 12;
  c.encoder_channels = 16;
  c.heatmap_size = 16;
  return c;
}

nn::Var box_mask(int n, int s, int x0, int y0, int x1, int y1) {
  Tensor m({n, 1, s, s});
  for (int b = 0; b < n; ++b)
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) m.at(b, 0, y, x) = 1.0f;
  return nn::input(m);
}

TEST(GazeHead, OutputShapesAndRanges) {
  nn::ParameterStore store(1);
  const GazeHead head(store, GazeHeadConfig{});
  std::mt19937_64 rng(1);
  nn::NoGradGuard guard;
  const auto out = head(nn::input(random_tensor({2, 64, 7, 7}, rng)), nn::input(random_tensor({2, 64, 7, 7}, rng)),
                        box_mask(2, 224, 10, 50, 40, 90));
  EXPECT_EQ(out.location->value.shape(), (Shape{2, 16, 7, 7}));
  EXPECT_EQ(out.attention->value.shape(), (Shape{2, 1, 7, 7}));
  EXPECT_EQ(out.heatmap->value.shape(), (Shape{2, 1, 64, 64}));
  for (float v : out.attention->value.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  for (float v : out.heatmap->value.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(GazeHead, RejectsEmptyOrMisshapenMask) {
  nn::ParameterStore store(2);
  const GazeHead head(store, small_head());
  EXPECT_THROW(head.encode_head_location(nn::input(Tensor({1, 1, 64, 64}))), Error);
  EXPECT_THROW(head.encode_head_location(nn::input(Tensor({1, 1, 32, 32}, 1.0f))), Error);
}

TEST(GazeHead, AttentionGatesSceneFeatures) {
  nn::ParameterStore store(3);
  const GazeHead head(store, small_head());
  std::mt19937_64 rng(3);
  nn::NoGradGuard guard;
  const auto scene_a = nn::input(random_tensor({1, 12, 2, 2}, rng));
  const auto scene_b = nn::input(random_tensor({1, 12, 2, 2}, rng));
  const auto mask = box_mask(1, 64, 2, 2, 20, 20);
  const auto loc = head.encode_head_location(mask);
  const auto zero = nn::input(Tensor({1, 1, 2, 2}));
  // with zero attention the scene features no longer matter
  EXPECT_EQ(head.predict_heatmap(scene_a, loc, zero)->value, head.predict_heatmap(scene_b, loc, zero)->value);
  const auto one = nn::input(Tensor({1, 1, 2, 2}, 1.0f));
  EXPECT_GT(testing::max_abs_diff(head.predict_heatmap(scene_a, loc, one)->value,
                                  head.predict_heatmap(scene_b, loc, one)->value),
            0.0);
}

TEST(GazeHead, HeadPositionChangesAttention) {
  nn::ParameterStore store(4);
  const GazeHead head(store, small_head());
  std::mt19937_64 rng(4);
  const auto fh = nn::input(random_tensor({1, 12, 2, 2}, rng));
  nn::NoGradGuard guard;
  const auto a = head.head_attention(box_mask(1, 64, 0, 0, 16, 16), fh);
  const auto b = head.head_attention(box_mask(1, 64, 40, 40, 60, 60), fh);
  EXPECT_GT(testing::max_abs_diff(a->value, b->value), 0.0);
}

TEST(GazeHead, ParametersReceiveGradient) {
  nn::ParameterStore store(5);
  const GazeHead head(store, small_head());
  std::mt19937_64 rng(5);
  const auto out = head(nn::input(random_tensor({1, 12, 2, 2}, rng)), nn::input(random_tensor({1, 12, 2, 2}, rng)),
                        box_mask(1, 64, 4, 4, 24, 24));
  nn::backward(out.heatmap, random_tensor(out.heatmap->value.shape(), rng));
  for (const auto& [name, p] : store.entries()) EXPECT_TRUE(p->has_grad()) << name;
}

TEST(GazeHeadConfig, JsonRoundTrip) {
  GazeHeadConfig c = small_head();
  const nlohmann::json j = c;
  EXPECT_FALSE(j.contains("image_size"));
  auto back = j.get<GazeHeadConfig>();
  back.image_size = c.image_size;
  back.feature_channels = c.feature_channels;
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.heatmap_size, 16);
}

// ---- losses ---------------------------------------------------------------

TEST(GaussianHeatmap, PeakAtQuantizedCellForEveryCell) {
  const GazeLossConfig cfg;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const Point2 q{(c + 0.3) / 64, (r + 0.7) / 64};
      const Heatmap t = gaussian_gt_heatmap(q, cfg);
      ASSERT_EQ(t.at(r, c), 1.0);
      const double mx = *std::max_element(t.values().begin(), t.values().end());
      ASSERT_EQ(mx, 1.0);
    }
}

TEST(GaussianHeatmap, NeighbourRatio) {
  const GazeLossConfig cfg;
  const Heatmap t = gaussian_gt_heatmap({0.5, 0.5}, cfg);
  EXPECT_NEAR(t.at(32, 33), std::exp(-1.0 / 18.0), 1e-12);
  EXPECT_NEAR(t.at(31, 32), std::exp(-1.0 / 18.0), 1e-12);
  EXPECT_NEAR(t.at(33, 33), std::exp(-2.0 / 18.0), 1e-12);
}

TEST(GaussianHeatmap, EdgePointsClampIntoGrid) {
  const GazeLossConfig cfg;
  EXPECT_EQ(quantize_point({1.0, 1.0}, 64, 64), (std::pair<int, int>{63, 63}));
  EXPECT_EQ(quantize_point({-0.1, 0.0}, 64, 64), (std::pair<int, int>{0, 0}));
  EXPECT_EQ(gaussian_gt_heatmap({1.0, 0.0}, cfg).at(0, 63), 1.0);
  EXPECT_THROW(quantize_point({std::nan(""), 0.5}, 64, 64), Error);
}

TEST(AucGroundTruth, DiscWithinThreeSigma) {
  const GazeLossConfig cfg;
  const Heatmap t = auc_ground_truth({0.5, 0.5}, cfg);
  int positives = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const double d2 = (i - 32) * (i - 32) + (j - 32) * (j - 32);
      EXPECT_EQ(t.at(i, j), d2 <= 81.0 ? 1.0 : 0.0) << i << "," << j;
      positives += t.at(i, j) == 1.0;
    }
  EXPECT_GT(positives, 200);
}

TEST(GazeMse, ValueAndGradient) {
  Heatmap m({2, 2}, 0.5), t({2, 2});
  t.at(0, 0) = 1.0;
  const auto l = gaze_mse_loss(m, t);
  EXPECT_DOUBLE_EQ(l.value, (0.25 * 4) / 4);
  EXPECT_DOUBLE_EQ(l.grad.at(0, 0), 2 * -0.5 / 4);
  EXPECT_DOUBLE_EQ(l.grad.at(1, 1), 2 * 0.5 / 4);
  EXPECT_DOUBLE_EQ(gaze_mse_loss(t, t).value, 0.0);
  EXPECT_THROW(gaze_mse_loss(m, Heatmap({3, 3})), Error);
}

TEST(EnergyLoss, UniformHeatmapGivesMinusOne) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  const Heatmap m({64, 64}, 0.37);
  for (int t = 0; t < 100; ++t) {
    const double x = u(rng) * 180, y = u(rng) * 180;
    const auto b = make_box(x, y, x + 8 + u(rng) * 40, y + 8 + u(rng) * 40);
    EXPECT_NEAR(energy_aggregation_loss(m, b, {224, 224}).value, -1.0, 1e-9);
  }
  EXPECT_NEAR(energy_aggregation_loss(m, make_box(0, 0, 224, 224), {224, 224}).value, -1.0, 1e-12);
}

TEST(EnergyLoss, ConcentratedMass) {
  Heatmap m({64, 64});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m.at(i, j) = 2.0;
  // 16 cells hold all the energy; the box covers exactly those cells
  EXPECT_DOUBLE_EQ(energy_aggregation_loss(m, make_box(0, 0, 14, 14), {224, 224}).value, -256.0);
}

TEST(EnergyLoss, ScaleInvarianceAndBound) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    Heatmap m({16, 16});
    for (auto& v : m.values()) v = u(rng);
    const double x = u(rng) * 40, y = u(rng) * 40;
    const auto b = make_box(x, y, x + 10 + u(rng) * 20, y + 10 + u(rng) * 20);
    const double l = energy_aggregation_loss(m, b, {64, 64}).value;
    Heatmap s = m;
    const double c = 0.01 + 100 * u(rng);
    for (auto& v : s.values()) v *= c;
    EXPECT_NEAR(energy_aggregation_loss(s, b, {64, 64}).value, l, 1e-9);
    const int n = box_cells(b, 16, 16, {64, 64}).count();
    EXPECT_LT(l, 0.0);
    EXPECT_GE(l, -256.0 / n - 1e-12);
  }
}

TEST(EnergyLoss, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1);
  for (int t = 0; t < 20; ++t) {
    Heatmap m({8, 8});
    for (auto& v : m.values()) v = u(rng);
    const auto b = make_box(u(rng) * 10, u(rng) * 10, 16 + u(rng) * 14, 16 + u(rng) * 14);
    const auto l = energy_aggregation_loss(m, b, {32, 32});
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double h = 1e-6, old = m[k];
      m[k] = old + h;
      const double up = energy_aggregation_loss(m, b, {32, 32}).value;
      m[k] = old - h;
      const double down = energy_aggregation_loss(m, b, {32, 32}).value;
      m[k] = old;
      EXPECT_NEAR(l.grad[k], (up - down) / (2 * h), 1e-4);
    }
  }
}

TEST(EnergyLoss, ZeroHeatmapIsGuarded) {
  const auto l = energy_aggregation_loss(Heatmap({8, 8}), make_box(0, 0, 16, 16), {32, 32});
  EXPECT_TRUE(std::isfinite(l.value));
  for (double g : l.grad.values()) EXPECT_TRUE(std::isfinite(g));
}

TEST(TotalLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(total_loss(0, 0, -1, {}), -1.0);
  EXPECT_DOUBLE_EQ(total_loss(2, 3, -1, {0.5, 2, 3}), 1 + 6 - 3);
  EXPECT_DOUBLE_EQ(total_loss(2, 3, -1, {1, 1, 0}), 5.0);
  EXPECT_THROW(total_loss(std::nan(""), 0, 0, {}), Error);
  EXPECT_THROW(total_loss(0, 0, INFINITY, {}), Error);
}

TEST(GazeLossConfig, Validation) {
  GazeLossConfig c;
  c.sigma_x = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.weights.eng = -1;
  EXPECT_THROW(c.validate(), Error);
  const nlohmann::json j = GazeLossConfig{};
  EXPECT_EQ(nlohmann::json(j.get<GazeLossConfig>()), j);
}

}  // namespace
}  // namespace gatector
