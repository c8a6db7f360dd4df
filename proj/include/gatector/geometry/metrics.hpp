#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/geometry/box.hpp"
#include "gatector/tensor/tensor.hpp"

namespace gatector {

/// 2-D non-negative grid of shape (rows, cols); predicted and ground-truth gaze maps.
using Heatmap = TensorD;

// ---- box similarity -------------------------------------------------------

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double union_area(const BoundingBox& a, const BoundingBox& b);
/// Smallest axis-aligned box enclosing both.
BoundingBox closure(const BoundingBox& a, const BoundingBox& b);

double iou(const BoundingBox& p, const BoundingBox& g);
/// Union over minimum closure.
double uoc(const BoundingBox& p, const BoundingBox& g);
/// min(|p|/|g|, |g|/|p|).
double size_similarity(const BoundingBox& p, const BoundingBox& g);
/// Size-weighted union over closure; in (0, 1] and nonzero for disjoint boxes.
double wuoc(const BoundingBox& p, const BoundingBox& g);

// ---- detection evaluation -------------------------------------------------

/// Greedy per-category suppression by descending score (ties: lower index first).
/// Returns indices into `boxes` in output order; kept boxes within one category
/// have pairwise IoU < iou_threshold.
std::vector<std::size_t> nms_indices(std::span<const BoundingBox> boxes, double iou_threshold, int top_k);
std::vector<BoundingBox> nms(std::span<const BoundingBox> boxes, double iou_threshold, int top_k);

struct ImageDetections {
  std::vector<BoundingBox> predictions;  // scored
  std::vector<BoundingBox> ground_truth;
};

/// 101-point interpolated AP, averaged over categories that have ground truth.
double average_precision(std::span<const ImageDetections> images, double iou_threshold);

struct ApSummary {
  double ap = 0.0;    // mean over IoU 0.50:0.05:0.95
  double ap50 = 0.0;
  double ap75 = 0.0;
};
ApSummary ap_summary(std::span<const ImageDetections> images);

// ---- heatmap / gaze -------------------------------------------------------

/// Inclusive cell index range whose centers fall inside a box.
struct CellRange {
  int row0 = 0, row1 = -1, col0 = 0, col1 = -1;
  int count() const { return (row1 >= row0 && col1 >= col0) ? (row1 - row0 + 1) * (col1 - col0 + 1) : 0; }
};

/// Cells of a rows x cols grid laid over `image` whose centers lie inside `b` (closed interval).
CellRange box_cells(const BoundingBox& b, int rows, int cols, ImageSize image);

/// Mean heatmap value over the cells covered by `b`. Throws if no cell is covered.
double box_mean_energy(const Heatmap& m, const BoundingBox& b, ImageSize image);

/// Index of the box with maximum mean energy; ties go to higher score, then lower index.
std::size_t select_gaze_object_index(const Heatmap& m, std::span<const BoundingBox> boxes, ImageSize image);
BoundingBox select_gaze_object(const Heatmap& m, std::span<const BoundingBox> boxes, ImageSize image);

/// ROC area with `gt_binary` (0/1) as labels and heatmap values as confidences.
double gaze_auc(const Heatmap& m, const Heatmap& gt_binary);

/// Normalized coordinates of the arg-max cell center.
Point2 heatmap_peak(const Heatmap& m);

double l2_distance(Point2 a, Point2 b);
/// Angle in degrees between the two gaze directions.
double angular_error(const GazeVector& pred, const GazeVector& gt);

// ---- aggregate report -----------------------------------------------------

struct MetricReport {
  double auc = 0.0;
  double l2_dist = 0.0;
  double angular_err = 0.0;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double wuoc_mean = 0.0;
  int sample_count = 0;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

}  // namespace gatector
