#pragma once

// Single-scale anchor detector over the defocused pyramid.
//
// Raw grid layout, per image: channel a*(5+C) + k, k = 0..3 box offsets
// (tx, ty, tw, th), k = 4 objectness logit, k = 5.. class logits.

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/geometry/box.hpp"
#include "gatector/nn/layers.hpp"
#include "gatector/sgs/sgs.hpp"

namespace gatector {

struct AnchorSet {
  std::vector<std::pair<double, double>> sizes{{12.0, 16.0}, {19.0, 40.0}, {28.0, 64.0}};  // (w, h) pixels

  int count() const { return static_cast<int>(sizes.size()); }
  void validate() const;
};

struct DetectionConfig {
  int num_classes = 24;
  AnchorSet anchors;
  std::array<int, 3> neck_channels{64, 64, 32};  // N5, N4, N3
  double score_threshold = 0.05;
  double select_score_threshold = 0.5;  // gaze-object candidates; AP uses score_threshold
  double nms_iou = 0.3;
  int top_k = 100;
  double ignore_iou = 0.5;

  int channels_per_anchor() const { return 5 + num_classes; }
  int grid_channels() const { return anchors.count() * channels_per_anchor(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const AnchorSet& a);
void from_json(const nlohmann::json& j, AnchorSet& a);
void to_json(nlohmann::json& j, const DetectionConfig& c);
void from_json(const nlohmann::json& j, DetectionConfig& c);

/// Top-down fusion of P5 -> P4 -> P3 (upsampling by Defocus or bilinear),
/// then one 1x1 prediction layer on the finest level only.
class DetectionHead {
 public:
  DetectionHead() = default;
  DetectionHead(nn::ParameterStore& store, const DetectionConfig& config, std::array<int, 3> level_channels,
                UpsampleMode upsample, int ratio);

  /// levels: P3, P4, P5 (finest first). Returns (N, A*(5+C), H3, W3).
  nn::Var operator()(const std::array<nn::Var, 3>& levels) const;

 private:
  UpsampleMode upsample_ = UpsampleMode::kDefocus;
  int ratio_ = 2;
  nn::ConvNormAct n5_, n4_, n3_;
  nn::Conv2d predict_;
};

/// Pixel stride of a grid cell.
inline double grid_stride(int image_size, int grid_size) { return static_cast<double>(image_size) / grid_size; }

struct BoxParams {
  double cx, cy, w, h;
};

inline BoxParams to_params(const BoundingBox& b) {
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1};
}
BoundingBox from_params(const BoxParams& p, int category_id = 0);

struct CellOffsets {
  double tx, ty, tw, th;
};

/// Decodes one anchor's offsets at cell (row i, col j).
BoxParams decode_offsets(const CellOffsets& t, int i, int j, double stride, std::pair<double, double> anchor);
/// Inverse of decode_offsets; the centre must lie inside cell (i, j).
CellOffsets encode_box(const BoxParams& box, int i, int j, double stride, std::pair<double, double> anchor);

/// grid: (A*(5+C), H, W) for one image. Returns boxes scoring above
/// `score_threshold`, clipped to the image, category = argmax class.
std::vector<BoundingBox> decode_boxes(const Tensor& grid, const AnchorSet& anchors, int num_classes,
                                      ImageSize image, double score_threshold);

struct CiouTerms {
  double loss = 0, iou = 0, rho2 = 0, diag2 = 0, v = 0, alpha = 0;
  std::array<double, 4> grad{};  // d loss / d (cx, cy, w, h) of pred, alpha held constant
};

CiouTerms ciou_loss(const BoxParams& pred, const BoxParams& gt);

enum class AnchorRole : signed char { kNegative = 0, kPositive = 1, kIgnore = -1 };

struct Assignment {
  int grid_h = 0, grid_w = 0;
  std::vector<AnchorRole> role;  // index (a*H + i)*W + j
  std::vector<int> gt_index;     // valid for positives
  int positives = 0;
};

/// Each GT goes to the best-IoU anchor (shape only) at the cell holding its
/// centre; other anchors overlapping any GT above `ignore_iou` are ignored.
Assignment assign_targets(std::span<const BoundingBox> gts, const AnchorSet& anchors, int grid_h, int grid_w,
                          double stride, double ignore_iou);

struct DetectionLoss {
  double cls = 0, obj = 0, reg = 0;
  int positives = 0;
  double total() const { return cls + obj + reg; }
};

/// Loss for one image plus d loss / d grid (same shape as `grid`), scaled by
/// `grad_scale`.
DetectionLoss detection_loss(const Tensor& grid, std::span<const BoundingBox> gts, const DetectionConfig& config,
                             double stride, Tensor* grad = nullptr, double grad_scale = 1.0);

/// Stable log(1 + exp(-|z|)) based binary cross-entropy on a logit.
double bce_with_logit(double z, double target);

}  // namespace gatector
