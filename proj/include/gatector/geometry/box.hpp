#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "gatector/common/error.hpp"

namespace gatector {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Axis-aligned box in image pixels. Ground truth carries no score.
struct BoundingBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  int category_id = 0;
  std::optional<double> score;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  Point2 center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 < x2 &&
           y1 < y2 && category_id >= 0;
  }

  double score_or(double fallback) const { return score.value_or(fallback); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox make_box(double x1, double y1, double x2, double y2, int category = 0,
                            std::optional<double> score = std::nullopt) {
  BoundingBox b{x1, y1, x2, y2, category, score};
  require(b.valid(), "invalid bounding box (" + std::to_string(x1) + "," + std::to_string(y1) + "," +
                         std::to_string(x2) + "," + std::to_string(y2) + ")");
  return b;
}

inline BoundingBox box_from_center(double cx, double cy, double w, double h, int category = 0) {
  return BoundingBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, category, std::nullopt};
}

inline bool contains(const BoundingBox& b, Point2 p) { return p.x >= b.x1 && p.x <= b.x2 && p.y >= b.y1 && p.y <= b.y2; }

/// Head center -> gaze target, used for angular error.
struct GazeVector {
  Point2 origin;
  Point2 target;
};

}  // namespace gatector
