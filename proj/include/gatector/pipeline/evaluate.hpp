#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/pipeline/model.hpp"

namespace gatector {

/// What a model (or an oracle) emits for one sample.
struct SampleOutput {
  std::vector<BoundingBox> boxes;  // after NMS, scored
  Heatmap heatmap;                 // (rows, cols), non-negative
};

struct SampleResult {
  std::string image_id;
  std::optional<std::size_t> pred_gaze_index;  // into SampleOutput::boxes
  std::optional<std::size_t> gt_gaze_index;    // selection under the ground-truth heatmap
  double wuoc_pred = 0.0;
  double wuoc_gt_gaze = 0.0;
  double auc = 0.0;
  double l2 = 0.0;
  double angular = 0.0;
  bool gaze_object_hit = false;  // IoU >= 0.5 and same category as the annotated gaze box
};

struct EvalResult {
  MetricReport report;
  double wuoc_gt_gaze = 0.0;
  double gaze_object_accuracy = 0.0;
  std::vector<SampleResult> samples;
};

nlohmann::json to_json(const EvalResult& r);

/// Scores outputs against samples. Gaze-object candidates are boxes scoring at
/// least `min_score` (unscored boxes always qualify) that cover a heatmap cell;
/// samples without candidates get wUoC 0.
EvalResult evaluate_outputs(std::span<const Sample> samples, std::span<const SampleOutput> outputs,
                            const GazeLossConfig& loss, double min_score = 0.0);

/// Post-processes a raw forward pass into per-sample outputs (decode, NMS).
std::vector<SampleOutput> postprocess(const GaTector& model, const GaTector::Outputs& out);

/// Runs the model over samples in batches of `batch_size` without recording gradients.
std::vector<SampleOutput> predict(const GaTector& model, std::span<const Sample> samples, int batch_size = 8);

EvalResult evaluate(const GaTector& model, std::span<const Sample> samples, const GazeLossConfig& loss,
                    int batch_size = 8);

/// Oracle outputs: ground-truth boxes with score 1 and the Gaussian GT heatmap.
std::vector<SampleOutput> oracle_outputs(std::span<const Sample> samples, const GazeLossConfig& loss);

/// Writes predictions as JSON lines in the annotation schema; gaze_box_index
/// refers to the predicted boxes (-1 if none).
void write_predictions(const std::filesystem::path& path, std::span<const Sample> samples,
                       std::span<const SampleOutput> outputs, const EvalResult& result);

struct InferResult {
  std::vector<BoundingBox> boxes;
  Heatmap heatmap;
  std::optional<BoundingBox> gaze_object;
};

nlohmann::json to_json(const InferResult& r);

InferResult infer(const GaTector& model, const Image& scene, const BoundingBox& head_box);

/// 2x2 panel: detections, heatmap overlay, predicted gaze box, annotated gaze box.
Image render_panels(const Sample& sample, const SampleOutput& output, std::optional<std::size_t> pred_index);

/// Row-major float32 dump of a heatmap.
void write_heatmap_raw(const std::filesystem::path& path, const Heatmap& m);

}  // namespace gatector
