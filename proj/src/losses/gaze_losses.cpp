#include "gatector/losses/gaze_losses.hpp"

#include <algorithm>
#include <cmath>

namespace gatector {

void GazeLossConfig::validate() const {
  if (!(sigma_x > 0 && sigma_y > 0)) fail(ErrorKind::kConfig, "gaussian sigmas must be positive");
  if (heatmap_rows < 1 || heatmap_cols < 1) fail(ErrorKind::kConfig, "heatmap size must be positive");
  if (weights.det < 0 || weights.gaze < 0 || weights.eng < 0) fail(ErrorKind::kConfig, "loss weights must be >= 0");
}

void to_json(nlohmann::json& j, const LossWeights& w) { j = {{"det", w.det}, {"gaze", w.gaze}, {"eng", w.eng}}; }

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.det = j.value("det", w.det);
  w.gaze = j.value("gaze", w.gaze);
  w.eng = j.value("eng", w.eng);
}

void to_json(nlohmann::json& j, const GazeLossConfig& c) {
  j = {{"sigma_x", c.sigma_x}, {"sigma_y", c.sigma_y}, {"weights", c.weights}, {"energy_eps", c.energy_eps}};
}

void from_json(const nlohmann::json& j, GazeLossConfig& c) {
  c.sigma_x = j.value("sigma_x", c.sigma_x);
  c.sigma_y = j.value("sigma_y", c.sigma_y);
  if (j.contains("weights")) c.weights = j.at("weights").get<LossWeights>();
  c.energy_eps = j.value("energy_eps", c.energy_eps);
}

std::pair<int, int> quantize_point(Point2 q, int rows, int cols) {
  require(std::isfinite(q.x) && std::isfinite(q.y), "gaze point must be finite");
  const int col = std::clamp(static_cast<int>(std::floor(q.x * cols)), 0, cols - 1);
  const int row = std::clamp(static_cast<int>(std::floor(q.y * rows)), 0, rows - 1);
  return {row, col};
}

Heatmap gaussian_gt_heatmap(Point2 q, const GazeLossConfig& cfg) {
  cfg.validate();
  const auto [r0, c0] = quantize_point(q, cfg.heatmap_rows, cfg.heatmap_cols);
  Heatmap t({cfg.heatmap_rows, cfg.heatmap_cols});
  double peak = 0.0;
  for (int i = 0; i < cfg.heatmap_rows; ++i) {
    for (int j = 0; j < cfg.heatmap_cols; ++j) {
      const double dx = j - c0, dy = i - r0;
      const double v = std::exp(-(dx * dx / (2 * cfg.sigma_x * cfg.sigma_x) + dy * dy / (2 * cfg.sigma_y * cfg.sigma_y)));
      t.at(i, j) = v;
      peak = std::max(peak, v);
    }
  }
  for (auto& v : t.values()) v /= peak;
  return t;
}

Heatmap auc_ground_truth(Point2 q, const GazeLossConfig& cfg) {
  Heatmap t = gaussian_gt_heatmap(q, cfg);
  const double cut = std::exp(-4.5);
  for (auto& v : t.values()) v = v >= cut ? 1.0 : 0.0;
  return t;
}

LossValue gaze_mse_loss(const Heatmap& m, const Heatmap& t) {
  require(m.same_shape(t), "gaze_mse_loss: shape mismatch " + shape_string(m.shape()) + " vs " +
                               shape_string(t.shape()));
  LossValue out{0.0, Heatmap(m.shape())};
  const double inv = 1.0 / static_cast<double>(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double d = m[k] - t[k];
    out.value += d * d;
    out.grad[k] = 2.0 * d * inv;
  }
  out.value *= inv;
  return out;
}

LossValue energy_aggregation_loss(const Heatmap& m, const BoundingBox& gaze_box, ImageSize image, double eps) {
  require(m.rank() == 2, "energy_aggregation_loss: heatmap must be 2-D");
  const int rows = m.dim(0), cols = m.dim(1);
  const CellRange r = box_cells(gaze_box, rows, cols, image);
  const double e_b = box_mean_energy(m, gaze_box, image);
  double sum = 0.0;
  for (double v : m.values()) sum += v;
  const double hw = static_cast<double>(m.size());
  const double raw_e_i = sum / hw;
  const bool guarded = raw_e_i < eps;
  const double e_i = guarded ? eps : raw_e_i;

  LossValue out{-e_b / e_i, Heatmap(m.shape())};
  // d/dm of -E_b/E_I = -(dE_b * E_I - E_b * dE_I) / E_I^2
  const double outside = guarded ? 0.0 : e_b / (e_i * e_i * hw);
  for (auto& g : out.grad.values()) g = outside;
  const double inside = -1.0 / (r.count() * e_i);
  for (int i = r.row0; i <= r.row1; ++i)
    for (int j = r.col0; j <= r.col1; ++j) out.grad.at(i, j) += inside;
  return out;
}

double total_loss(double l_det, double l_gaze, double l_eng, const LossWeights& w) {
  if (!std::isfinite(l_det)) fail(ErrorKind::kNumerical, "non-finite detection loss");
  if (!std::isfinite(l_gaze)) fail(ErrorKind::kNumerical, "non-finite gaze loss");
  if (!std::isfinite(l_eng)) fail(ErrorKind::kNumerical, "non-finite energy loss");
  return w.det * l_det + w.gaze * l_gaze + w.eng * l_eng;
}

}  // namespace gatector
