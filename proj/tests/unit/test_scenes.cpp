#include <gtest/gtest.h>

#include <fstream>

#include "gatector/geometry/metrics.hpp"
#include "gatector/geometry/records.hpp"
#include "gatector/scenes/scenes.hpp"
#include "test_util.hpp"

namespace gatector {
namespace {

TEST(Scenes, GenerationIsDeterministic) {
  const SceneSpec spec;
  const auto a = generate_sample(spec, 5), b = generate_sample(spec, 5);
  EXPECT_EQ(a.scene, b.scene);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(a.record, b.record);
  EXPECT_NE(generate_sample(spec, 6).record, a.record);
  SceneSpec other = spec;
  other.seed = 99;
  EXPECT_NE(generate_sample(other, 5).record, a.record);
}

TEST(Scenes, AnnotationsAreConsistent) {
  const SceneSpec spec;
  for (std::size_t k = 0; k < 40; ++k) {
    const Sample s = generate_sample(spec, k);
    const auto& r = s.record;
    EXPECT_EQ(r.image_id, sample_id(k));
    ASSERT_EQ(r.boxes.size(), static_cast<std::size_t>(spec.grid * spec.grid));
    ASSERT_GE(r.gaze_box_index, 0);
    ASSERT_LT(r.gaze_box_index, static_cast<int>(r.boxes.size()));
    for (const auto& b : r.boxes) {
      EXPECT_TRUE(b.valid());
      EXPECT_GE(b.x1, 0);
      EXPECT_GE(b.y1, 0);
      EXPECT_LE(b.x2, spec.image_size);
      EXPECT_LE(b.y2, spec.image_size);
      EXPECT_GE(std::min(b.width(), b.height()), 8);
      EXPECT_LE(std::max(b.width(), b.height()), 80);
      EXPECT_LT(b.category_id, spec.num_categories);
      EXPECT_FALSE(b.score.has_value());
      EXPECT_EQ(iou(b, s.head_box()), 0.0);
    }
    const Point2 q{r.gaze_point.x * spec.image_size, r.gaze_point.y * spec.image_size};
    EXPECT_TRUE(contains(s.gaze_box(), q));
    EXPECT_LE(s.head_box().x2, spec.shelf_x0());
    EXPECT_EQ(s.scene.size(), (ImageSize{224, 224}));
    EXPECT_EQ(s.head.size(), (ImageSize{224, 224}));
  }
}

TEST(Scenes, ProductsDoNotOverlap) {
  const Sample s = generate_sample(SceneSpec{}, 3);
  for (std::size_t i = 0; i < s.record.boxes.size(); ++i)
    for (std::size_t j = i + 1; j < s.record.boxes.size(); ++j)
      EXPECT_EQ(iou(s.record.boxes[i], s.record.boxes[j]), 0.0);
}

TEST(Scenes, HeadMaskMatchesBox) {
  const Tensor m = head_mask(make_box(10, 20, 14, 22), 32);
  ASSERT_EQ(m.shape(), (Shape{1, 32, 32}));
  double sum = 0;
  for (float v : m.values()) sum += v;
  EXPECT_EQ(sum, 8);
  EXPECT_EQ(m.at(0, 20, 10), 1.0f);
  EXPECT_EQ(m.at(0, 22, 10), 0.0f);
}

TEST(Scenes, SpecValidation) {
  SceneSpec s;
  s.grid = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.jitter = 1.5;
  EXPECT_THROW(s.validate(), Error);
  const nlohmann::json j = SceneSpec{};
  EXPECT_EQ(nlohmann::json(j.get<SceneSpec>()), j);
}

TEST(Png, RoundTripIsLossless) {
  const auto dir = testing::temp_dir("png");
  const Sample s = generate_sample(SceneSpec{}, 1);
  write_png(dir / "a.png", s.scene);
  EXPECT_EQ(read_png(dir / "a.png"), s.scene);
  const Image gray = heatmap_to_image(TensorD({2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(gray.channels(), 1);
  EXPECT_EQ(gray.at(0, 0, 0), 0);
  EXPECT_EQ(gray.at(2, 1, 0), 255);
  write_png(dir / "g.png", gray);
  EXPECT_EQ(read_png(dir / "g.png"), gray);
  EXPECT_THROW(read_png(dir / "missing.png"), Error);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto dir = testing::temp_dir("dataset");
  SceneSpec spec;
  spec.seed = 4;
  write_dataset(spec, 5, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "images" / "000003.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "heads" / "000003.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "spec.json"));
  const Dataset d = read_dataset(dir);
  ASSERT_EQ(d.samples.size(), 5u);
  EXPECT_EQ(nlohmann::json(d.spec), nlohmann::json(spec));
  for (std::size_t k = 0; k < 5; ++k) {
    const Sample s = generate_sample(spec, k);
    EXPECT_EQ(d.samples[k].record, s.record);
    EXPECT_EQ(d.samples[k].scene, s.scene);
    EXPECT_EQ(d.samples[k].head, s.head);
  }
}

TEST(Dataset, TruncatedAnnotationLineIsReported) {
  const auto dir = testing::temp_dir("dataset_truncated");
  write_dataset(SceneSpec{}, 3, dir);
  std::string text;
  {
    std::ifstream in(dir / "annotations.jsonl");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  text.resize(text.size() - 25);
  std::ofstream(dir / "annotations.jsonl") << text;
  try {
    read_dataset(dir);
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
}

TEST(Dataset, EmptyDirectoryYieldsNoSamples) {
  const auto dir = testing::temp_dir("dataset_empty");
  EXPECT_TRUE(read_dataset(dir).samples.empty());
  EXPECT_THROW(read_dataset(dir / "nope"), Error);
}

TEST(Dataset, MissingImageIsADataError) {
  const auto dir = testing::temp_dir("dataset_missing");
  write_dataset(SceneSpec{}, 2, dir);
  std::filesystem::remove(dir / "images" / "000001.png");
  try {
    read_dataset(dir);
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

}  // namespace
}  // namespace gatector
