#include <gtest/gtest.h>

#include "gatector/defocus/defocus.hpp"
#include "gatector/pipeline/model.hpp"
#include "gatector/sgs/sgs.hpp"
#include "test_util.hpp"

namespace gatector {
namespace {

using testing::random_tensor;

SgsConfig small_config() {
  SgsConfig c;
  c.image_size = 64;
  c.backbone.stem_channels = 8;
  c.backbone.block_channels = {8, 16, 32, 64};
  c.backbone.blocks_per_stage = 1;
  c.gaze_channels = 24;
  return c;
}

std::vector<nn::Var> with_prefix(const nn::ParameterStore& store, const std::string& prefix) {
  std::vector<nn::Var> out;
  for (const auto& [name, v] : store.entries())
    if (name.rfind(prefix, 0) == 0) out.push_back(v);
  return out;
}

TEST(Sgs, ShapeTableAtFullSize) {
  SgsConfig c;
  nn::ParameterStore store(1);
  const SgsExtractor sgs(store, c);
  std::mt19937_64 rng(1);
  nn::NoGradGuard guard;
  const auto out = sgs(nn::input(random_tensor({1, 3, 224, 224}, rng)), nn::input(random_tensor({1, 3, 224, 224}, rng)));
  EXPECT_EQ(out.scene_stem->value.shape(), (Shape{1, 16, 112, 112}));
  EXPECT_EQ(out.head_stem->value.shape(), (Shape{1, 16, 112, 112}));
  EXPECT_EQ(out.scene.c2->value.shape(), (Shape{1, 16, 56, 56}));
  EXPECT_EQ(out.scene.c3->value.shape(), (Shape{1, 32, 28, 28}));
  EXPECT_EQ(out.scene.c4->value.shape(), (Shape{1, 64, 14, 14}));
  EXPECT_EQ(out.scene.c5->value.shape(), (Shape{1, 128, 7, 7}));
  EXPECT_EQ(out.head.c5->value.shape(), (Shape{1, 128, 7, 7}));
  EXPECT_EQ(out.det_levels[0]->value.shape(), (Shape{1, 8, 56, 56}));
  EXPECT_EQ(out.det_levels[1]->value.shape(), (Shape{1, 16, 28, 28}));
  EXPECT_EQ(out.det_levels[2]->value.shape(), (Shape{1, 32, 14, 14}));
  EXPECT_EQ(out.f_det, out.det_levels[2]);
  EXPECT_EQ(out.f_gaze_scene->value.shape(), (Shape{1, 64, 7, 7}));
  EXPECT_EQ(out.f_gaze_head->value.shape(), (Shape{1, 64, 7, 7}));
}

TEST(Sgs, DetectorLevelsAreDefocusedPyramid) {
  nn::ParameterStore store(2);
  const SgsExtractor sgs(store, small_config());
  std::mt19937_64 rng(2);
  nn::NoGradGuard guard;
  const auto out = sgs(nn::input(random_tensor({2, 3, 64, 64}, rng)), nn::input(random_tensor({2, 3, 64, 64}, rng)));
  EXPECT_EQ(out.det_levels[0]->value, defocus(out.scene.c3->value, 2));
  EXPECT_EQ(out.det_levels[2]->value, defocus(out.scene.c5->value, 2));
}

TEST(Sgs, ZeroPyramidGivesZeroDetectorFeatures) {
  nn::ParameterStore store(3);
  const SgsExtractor sgs(store, small_config());
  SgsOutputs out;
  out.scene = {nn::input(Tensor({1, 8, 16, 16})), nn::input(Tensor({1, 16, 8, 8})), nn::input(Tensor({1, 32, 4, 4})),
               nn::input(Tensor({1, 64, 2, 2}))};
  out.head = out.scene;
  sgs.task_specific(out);
  for (const auto& level : out.det_levels) EXPECT_EQ(testing::max_abs(level->value), 0.0);
}

TEST(Sgs, InputSpecificStemsAreIndependent) {
  nn::ParameterStore store(4);
  const SgsExtractor sgs(store, small_config());
  std::mt19937_64 rng(4);
  nn::NoGradGuard guard;
  const auto scene = nn::input(random_tensor({1, 3, 64, 64}, rng));
  const auto head = nn::input(random_tensor({1, 3, 64, 64}, rng));
  const auto [s0, h0] = sgs.input_specific(scene, head);
  EXPECT_GT(testing::max_abs_diff(s0->value, h0->value), 0.0);

  for (auto& p : with_prefix(store, "sgs.psi_s"))
    for (auto& v : p->value.values()) v += 0.5f;
  const auto [s1, h1] = sgs.input_specific(scene, head);
  EXPECT_EQ(h1->value, h0->value);
  EXPECT_GT(testing::max_abs_diff(s1->value, s0->value), 0.0);

  for (auto& p : with_prefix(store, "sgs.psi_h"))
    for (auto& v : p->value.values()) v -= 0.5f;
  const auto [s2, h2] = sgs.input_specific(scene, head);
  EXPECT_EQ(s2->value, s1->value);
  EXPECT_GT(testing::max_abs_diff(h2->value, h1->value), 0.0);
}

TEST(Sgs, RejectsWrongInputShape) {
  nn::ParameterStore store(5);
  const SgsExtractor sgs(store, small_config());
  EXPECT_THROW(sgs.input_specific(nn::input(Tensor({1, 3, 32, 32})), nn::input(Tensor({1, 3, 64, 64}))), Error);
}

TEST(Sgs, ForwardLeavesParametersUntouched) {
  nn::ParameterStore store(6);
  const SgsExtractor sgs(store, small_config());
  std::vector<Tensor> before;
  for (const auto& [name, v] : store.entries()) before.push_back(v->value);
  std::mt19937_64 rng(6);
  sgs(nn::input(random_tensor({1, 3, 64, 64}, rng)), nn::input(random_tensor({1, 3, 64, 64}, rng)));
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(store.entries()[i].second->value, before[i]);
}

TEST(Sgs, OneBackboneServesBothBranches) {
  nn::ParameterStore store(7);
  const SgsExtractor sgs(store, small_config());
  EXPECT_TRUE(with_prefix(store, "sgs.head_backbone").empty());
  std::mt19937_64 rng(7);
  const auto out = sgs(nn::input(random_tensor({1, 3, 64, 64}, rng)), nn::input(random_tensor({1, 3, 64, 64}, rng)));
  for (const auto& p : with_prefix(store, "sgs.backbone")) {
    EXPECT_TRUE(nn::depends_on(out.scene.c5, p));
    EXPECT_TRUE(nn::depends_on(out.head.c5, p));
  }
}

TEST(Sgs, SharedGradientIsSumOfBothPasses) {
  std::mt19937_64 rng(8);
  const Tensor scene = random_tensor({1, 3, 64, 64}, rng), head = random_tensor({1, 3, 64, 64}, rng);
  nn::ParameterStore store(8);
  const SgsExtractor sgs(store, small_config());
  const auto run = [&](bool seed_scene, bool seed_head) {
    store.zero_grad();
    const auto out = sgs(nn::input(scene), nn::input(head));
    std::vector<std::pair<nn::Var, Tensor>> seeds;
    if (seed_scene) seeds.emplace_back(out.scene.c5, Tensor(out.scene.c5->value.shape(), 1.0f));
    if (seed_head) seeds.emplace_back(out.head.c5, Tensor(out.head.c5->value.shape(), 1.0f));
    nn::backward(seeds);
    std::vector<Tensor> g;
    for (const auto& p : with_prefix(store, "sgs.backbone")) g.push_back(p->has_grad() ? p->grad : Tensor(p->value.shape()));
    return g;
  };
  const auto gs = run(true, false), gh = run(false, true), both = run(true, true);
  for (std::size_t i = 0; i < both.size(); ++i)
    for (std::size_t k = 0; k < both[i].size(); ++k)
      EXPECT_NEAR(both[i][k], gs[i][k] + gh[i][k], 1e-3 * (1 + std::abs(both[i][k])));
}

TEST(Sgs, BaselineCostsExactlyOneExtraBackbone) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> mult(1, 6), blocks(1, 3), stem(2, 24), gaze(4, 64);
  for (int t = 0; t < 20; ++t) {
    SgsConfig c = small_config();
    c.backbone.stem_channels = stem(rng);
    for (int i = 0; i < 4; ++i) c.backbone.block_channels[static_cast<std::size_t>(i)] = 4 * mult(rng);
    c.backbone.blocks_per_stage = blocks(rng);
    c.gaze_channels = gaze(rng);
    const auto shared = parameter_count(c, SgsVariant::kShared);
    const auto baseline = parameter_count(c, SgsVariant::kTwoBackboneBaseline);
    EXPECT_LT(shared, baseline);
    nn::ParameterStore store(0);
    const SgsExtractor sgs(store, c);
    EXPECT_EQ(shared, store.scalar_count());
    EXPECT_EQ(baseline, shared + store.scalar_count("sgs.backbone"));
  }
}

TEST(Sgs, ClosedFormStemAndGazeCounts) {
  const SgsConfig c = small_config();
  nn::ParameterStore store(0);
  const SgsExtractor sgs(store, c);
  // 7x7 conv without bias + GroupNorm affine
  const std::size_t stem = 7 * 7 * 3 * 8 + 2 * 8;
  EXPECT_EQ(store.scalar_count("sgs.psi_s"), stem);
  EXPECT_EQ(store.scalar_count("sgs.psi_h"), stem);
  EXPECT_EQ(store.scalar_count("sgs.phi_s"), 64u * 24 + 24);
}

TEST(Sgs, DoublingWidthsRoughlyQuadruplesBackbone) {
  SgsConfig c = small_config();
  nn::ParameterStore a(0);
  const SgsExtractor sa(a, c);
  for (auto& w : c.backbone.block_channels) w *= 2;
  c.backbone.stem_channels *= 2;
  nn::ParameterStore b(0);
  const SgsExtractor sb(b, c);
  const double ratio = static_cast<double>(b.scalar_count("sgs.backbone")) / a.scalar_count("sgs.backbone");
  EXPECT_GT(ratio, 3.8);
  EXPECT_LT(ratio, 4.0);
}

TEST(Sgs, AblationSwitches) {
  SgsConfig c = small_config();
  c.input_specific = false;
  c.gaze_specific = false;
  c.upsample = UpsampleMode::kInterpolation;
  nn::ParameterStore store(10);
  const SgsExtractor sgs(store, c);
  EXPECT_TRUE(with_prefix(store, "sgs.psi_h").empty());
  EXPECT_TRUE(with_prefix(store, "sgs.phi_s").empty());
  std::mt19937_64 rng(10);
  nn::NoGradGuard guard;
  const auto out = sgs(nn::input(random_tensor({1, 3, 64, 64}, rng)), nn::input(random_tensor({1, 3, 64, 64}, rng)));
  EXPECT_EQ(out.f_gaze_scene->value.shape(), (Shape{1, 64, 2, 2}));
  EXPECT_EQ(out.det_levels[0]->value.shape(), (Shape{1, 16, 16, 16}));
  EXPECT_EQ(c.detector_level_channels(), (std::array<int, 3>{16, 32, 64}));
}

TEST(Sgs, ConfigValidation) {
  SgsConfig c = small_config();
  c.image_size = 100;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.backbone.block_channels[2] = 18;
  EXPECT_THROW(c.validate(), Error);
  const nlohmann::json j = small_config();
  const auto back = j.get<SgsConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_THROW(upsample_mode_from_string("nearest-ish"), Error);
}

TEST(HeadDelay, MaskNeverReachesTheExtractor) {
  ModelConfig mc;
  mc.sgs = small_config();
  const GaTector model(mc, 11);
  std::mt19937_64 rng(11);
  const auto scene = nn::input(random_tensor({1, 3, 64, 64}, rng));
  const auto head = nn::input(random_tensor({1, 3, 64, 64}, rng));
  Tensor m({1, 1, 64, 64});
  for (int y = 4; y < 20; ++y)
    for (int x = 4; x < 20; ++x) m.at(0, 0, y, x) = 1.0f;
  const auto mask = nn::input(m);
  const auto out = model.forward(scene, head, mask);
  const auto& f = out.features;
  for (const auto& v : {f.scene_stem, f.head_stem, f.scene.c2, f.scene.c3, f.scene.c4, f.scene.c5, f.head.c2, f.head.c5,
                        f.f_gaze_scene, f.f_gaze_head, f.f_det})
    EXPECT_FALSE(nn::depends_on(v, mask));
  EXPECT_FALSE(nn::depends_on(out.grid, mask));
  EXPECT_TRUE(nn::depends_on(out.gaze.location, mask));
  EXPECT_TRUE(nn::depends_on(out.gaze.heatmap, mask));
}

}  // namespace
}  // namespace gatector
