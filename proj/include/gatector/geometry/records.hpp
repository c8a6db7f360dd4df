#pragma once

// JSON-lines interchange: one record per image,
//   {image_id, boxes:[{x1,y1,x2,y2,category_id,score?}], gaze_point:[x,y], gaze_box_index}
// plus an optional head_box on dataset annotations.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/geometry/box.hpp"

namespace gatector {

struct ImageRecord {
  std::string image_id;
  std::vector<BoundingBox> boxes;
  Point2 gaze_point;  // normalized [0,1]^2
  int gaze_box_index = -1;
  std::optional<BoundingBox> head_box;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

void to_json(nlohmann::json& j, const BoundingBox& b);
void from_json(const nlohmann::json& j, BoundingBox& b);
void to_json(nlohmann::json& j, const ImageRecord& r);
void from_json(const nlohmann::json& j, ImageRecord& r);

/// Parses one line; errors name `line_number`.
ImageRecord parse_record(const std::string& line, int line_number);
std::vector<ImageRecord> read_records(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_records(const std::filesystem::path& path, std::span<const ImageRecord> records);

}  // namespace gatector
