#pragma once

// Toy retail shelves: a jittered grid of striped, colour-coded products on the
// right, one gazer's head in the left strip with a tick pointing at the
// product being looked at.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/geometry/records.hpp"
#include "gatector/scenes/image.hpp"

namespace gatector {

struct SceneSpec {
  int image_size = 224;
  int grid = 8;  // K x K products
  int num_categories = 24;
  double jitter = 1.0;  // fraction of free cell slack used for random offsets, [0,1]
  std::uint64_t seed = 0;

  // fixed layout
  int head_strip = 44;  // head lives in x < head_strip
  int shelf_x0() const { return 48; }
  int shelf_margin() const { return 6; }

  void validate() const;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

struct Sample {
  Image scene;
  Image head;  // head-box crop resized to the scene size
  ImageRecord record;

  const BoundingBox& gaze_box() const { return record.boxes.at(static_cast<std::size_t>(record.gaze_box_index)); }
  const BoundingBox& head_box() const { return *record.head_box; }
  /// Head center in normalized coordinates.
  Point2 head_center() const;
};

/// (1, S, S) mask, 1 on pixels whose centers lie inside the head box.
Tensor head_mask(const BoundingBox& head_box, int image_size);

Rgb category_color(int category, int num_categories);

std::string sample_id(std::size_t index);

Sample generate_sample(const SceneSpec& spec, std::size_t index);

/// Renders the head crop for an arbitrary head box of a scene.
Image make_head_crop(const Image& scene, const BoundingBox& head_box);

void write_dataset(const SceneSpec& spec, std::size_t n, const std::filesystem::path& dir);

struct Dataset {
  std::filesystem::path root;
  SceneSpec spec;
  std::vector<Sample> samples;
};

/// Loads a dataset directory. An empty or annotation-less directory yields no
/// samples and a warning on stderr.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace gatector
