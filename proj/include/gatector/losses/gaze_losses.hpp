#pragma once

#include <nlohmann/json.hpp>

#include "gatector/geometry/metrics.hpp"

namespace gatector {

struct LossWeights {
  double det = 1.0;
  double gaze = 1.0;
  double eng = 1.0;
};

struct GazeLossConfig {
  double sigma_x = 3.0;  // heatmap cells
  double sigma_y = 3.0;
  int heatmap_rows = 64;
  int heatmap_cols = 64;
  LossWeights weights;
  double energy_eps = 1e-12;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const GazeLossConfig& c);
void from_json(const nlohmann::json& j, GazeLossConfig& c);

/// Grid cell holding normalized point q.
std::pair<int, int> quantize_point(Point2 q, int rows, int cols);

/// Gaussian centred on the quantized gaze cell, divided by its maximum.
Heatmap gaussian_gt_heatmap(Point2 q, const GazeLossConfig& cfg);

/// 1 on cells within three sigma of the gaze cell, 0 elsewhere.
Heatmap auc_ground_truth(Point2 q, const GazeLossConfig& cfg);

struct LossValue {
  double value = 0.0;
  Heatmap grad;  // d value / d m
};

LossValue gaze_mse_loss(const Heatmap& m, const Heatmap& t);

/// -E_b / E_I with E_I guarded below by `eps`.
LossValue energy_aggregation_loss(const Heatmap& m, const BoundingBox& gaze_box, ImageSize image,
                                  double eps = 1e-12);

double total_loss(double l_det, double l_gaze, double l_eng, const LossWeights& w);

}  // namespace gatector
