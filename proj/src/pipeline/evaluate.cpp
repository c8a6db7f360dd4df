#include "gatector/pipeline/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gatector/geometry/records.hpp"

namespace gatector {

namespace {

/// Selection restricted to confident boxes that cover at least one heatmap cell.
std::optional<std::size_t> select_candidate(const Heatmap& m, std::span<const BoundingBox> boxes, ImageSize image,
                                            double min_score) {
  std::vector<BoundingBox> candidates;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].score.value_or(1.0) < min_score) continue;
    if (box_cells(boxes[i], m.dim(0), m.dim(1), image).count() == 0) continue;
    candidates.push_back(boxes[i]);
    origin.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  return origin[select_gaze_object_index(m, candidates, image)];
}

Heatmap heatmap_of(const Tensor& maps, int n) {
  const int rows = maps.dim(2), cols = maps.dim(3);
  Heatmap m({rows, cols});
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  for (std::size_t k = 0; k < plane; ++k) m[k] = maps[static_cast<std::size_t>(n) * plane + k];
  return m;
}

}  // namespace

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json j = r.report;
  j["wuoc_gt_gaze"] = r.wuoc_gt_gaze;
  j["gaze_object_accuracy"] = r.gaze_object_accuracy;
  return j;
}

EvalResult evaluate_outputs(std::span<const Sample> samples, std::span<const SampleOutput> outputs,
                            const GazeLossConfig& loss, double min_score) {
  require(samples.size() == outputs.size(), "evaluate: one output per sample required");
  if (samples.empty()) fail(ErrorKind::kData, "evaluation set is empty");
  EvalResult res;
  std::vector<ImageDetections> dets;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    const SampleOutput& o = outputs[k];
    const ImageSize image = s.scene.size();
    GazeLossConfig lc = loss;
    lc.heatmap_rows = o.heatmap.dim(0);
    lc.heatmap_cols = o.heatmap.dim(1);
    const Point2 q = s.record.gaze_point;
    const BoundingBox& gt_box = s.gaze_box();

    SampleResult r;
    r.image_id = s.record.image_id;
    r.auc = gaze_auc(o.heatmap, auc_ground_truth(q, lc));
    const Point2 peak = heatmap_peak(o.heatmap);
    r.l2 = l2_distance(peak, q);
    const Point2 head = s.head_center();
    if (l2_distance(peak, head) > 0)
      r.angular = angular_error({head, peak}, {head, q});
    else
      r.angular = 180.0;  // no direction at all: count as worst case

    r.pred_gaze_index = select_candidate(o.heatmap, o.boxes, image, min_score);
    r.gt_gaze_index = select_candidate(gaussian_gt_heatmap(q, lc), o.boxes, image, min_score);
    if (r.pred_gaze_index) {
      const BoundingBox& sel = o.boxes[*r.pred_gaze_index];
      r.wuoc_pred = wuoc(sel, gt_box);
      r.gaze_object_hit = iou(sel, gt_box) >= 0.5 && sel.category_id == gt_box.category_id;
    }
    if (r.gt_gaze_index) r.wuoc_gt_gaze = wuoc(o.boxes[*r.gt_gaze_index], gt_box);

    res.report.auc += r.auc;
    res.report.l2_dist += r.l2;
    res.report.angular_err += r.angular;
    res.report.wuoc_mean += r.wuoc_pred;
    res.wuoc_gt_gaze += r.wuoc_gt_gaze;
    res.gaze_object_accuracy += r.gaze_object_hit ? 1.0 : 0.0;
    dets.push_back({o.boxes, s.record.boxes});
    res.samples.push_back(std::move(r));
  }
  const double n = static_cast<double>(samples.size());
  res.report.sample_count = static_cast<int>(samples.size());
  res.report.auc /= n;
  res.report.l2_dist /= n;
  res.report.angular_err /= n;
  res.report.wuoc_mean /= n;
  res.wuoc_gt_gaze /= n;
  res.gaze_object_accuracy /= n;
  const ApSummary ap = ap_summary(dets);
  res.report.ap = ap.ap;
  res.report.ap50 = ap.ap50;
  res.report.ap75 = ap.ap75;
  return res;
}

std::vector<SampleOutput> postprocess(const GaTector& model, const GaTector::Outputs& out) {
  const auto& cfg = model.config().detection;
  const Tensor& grid = out.grid->value;
  const int n = grid.dim(0);
  const Shape cell_shape{grid.dim(1), grid.dim(2), grid.dim(3)};
  const std::size_t per = shape_size(cell_shape);
  const ImageSize image{model.image_size(), model.image_size()};
  std::vector<SampleOutput> res(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Tensor g(cell_shape, std::vector<float>(grid.data() + i * per, grid.data() + (i + 1) * per));
    const auto raw = decode_boxes(g, cfg.anchors, cfg.num_classes, image, cfg.score_threshold);
    res[static_cast<std::size_t>(i)].boxes = nms(raw, cfg.nms_iou, cfg.top_k);
    res[static_cast<std::size_t>(i)].heatmap = heatmap_of(out.gaze.heatmap->value, i);
  }
  return res;
}

std::vector<SampleOutput> predict(const GaTector& model, std::span<const Sample> samples, int batch_size) {
  nn::NoGradGuard guard;
  std::vector<SampleOutput> res;
  for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(batch_size)) {
    std::vector<const Sample*> ptrs;
    for (std::size_t k = b; k < std::min(samples.size(), b + static_cast<std::size_t>(batch_size)); ++k)
      ptrs.push_back(&samples[k]);
    const Batch batch = make_batch(ptrs);
    for (auto& o : postprocess(model, model.forward(batch))) res.push_back(std::move(o));
  }
  return res;
}

EvalResult evaluate(const GaTector& model, std::span<const Sample> samples, const GazeLossConfig& loss,
                    int batch_size) {
  if (samples.empty()) fail(ErrorKind::kData, "evaluation set is empty");
  const auto outputs = predict(model, samples, batch_size);
  return evaluate_outputs(samples, outputs, loss, model.config().detection.select_score_threshold);
}

std::vector<SampleOutput> oracle_outputs(std::span<const Sample> samples, const GazeLossConfig& loss) {
  std::vector<SampleOutput> res;
  for (const auto& s : samples) {
    SampleOutput o;
    for (auto b : s.record.boxes) {
      b.score = 1.0;
      o.boxes.push_back(b);
    }
    o.heatmap = gaussian_gt_heatmap(s.record.gaze_point, loss);
    res.push_back(std::move(o));
  }
  return res;
}

void write_predictions(const std::filesystem::path& path, std::span<const Sample> samples,
                       std::span<const SampleOutput> outputs, const EvalResult& result) {
  std::vector<ImageRecord> recs;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    ImageRecord r;
    r.image_id = samples[k].record.image_id;
    r.boxes = outputs[k].boxes;
    r.gaze_point = heatmap_peak(outputs[k].heatmap);
    const auto& idx = result.samples[k].pred_gaze_index;
    r.gaze_box_index = idx ? static_cast<int>(*idx) : -1;
    recs.push_back(std::move(r));
  }
  write_records(path, recs);
}

nlohmann::json to_json(const InferResult& r) {
  nlohmann::json j;
  j["boxes"] = r.boxes;
  j["heatmap_shape"] = {r.heatmap.dim(0), r.heatmap.dim(1)};
  j["gaze_point"] = {heatmap_peak(r.heatmap).x, heatmap_peak(r.heatmap).y};
  j["gaze_object"] = r.gaze_object ? nlohmann::json(*r.gaze_object) : nlohmann::json(nullptr);
  return j;
}

InferResult infer(const GaTector& model, const Image& scene, const BoundingBox& head_box) {
  const int S = model.image_size();
  if (scene.width() != S || scene.height() != S)
    fail(ErrorKind::kInvalidArgument, "image is " + std::to_string(scene.width()) + "x" +
                                          std::to_string(scene.height()) + ", model expects " + std::to_string(S));
  if (!head_box.valid() || head_box.x1 < 0 || head_box.y1 < 0 || head_box.x2 > S || head_box.y2 > S)
    fail(ErrorKind::kInvalidArgument, "head box lies outside the image");
  Sample s;
  s.scene = scene;
  s.record.head_box = head_box;
  s.head = make_head_crop(scene, head_box);
  const Sample* ptr = &s;
  nn::NoGradGuard guard;
  const Batch batch = make_batch(std::span<const Sample* const>(&ptr, 1));
  auto outputs = postprocess(model, model.forward(batch));
  InferResult r;
  r.boxes = std::move(outputs[0].boxes);
  r.heatmap = std::move(outputs[0].heatmap);
  const double min_score = model.config().detection.select_score_threshold;
  if (const auto idx = select_candidate(r.heatmap, r.boxes, scene.size(), min_score)) r.gaze_object = r.boxes[*idx];
  return r;
}

Image render_panels(const Sample& sample, const SampleOutput& output, std::optional<std::size_t> pred_index) {
  const int S = sample.scene.width(), H = sample.scene.height();
  Image canvas(2 * S, 2 * H, 3, 255);
  Image det = sample.scene, overlay = sample.scene, pred = sample.scene, gt = sample.scene;

  for (const auto& b : output.boxes) det.draw_box(b, 1, {0, 200, 0});

  const Heatmap& m = output.heatmap;
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  const double range = *hi - *lo;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < S; ++x) {
      const int i = std::min(m.dim(0) - 1, y * m.dim(0) / H), j = std::min(m.dim(1) - 1, x * m.dim(1) / S);
      const double v = range > 0 ? (m.at(i, j) - *lo) / range : 0.0;
      const double a = 0.7 * v;
      overlay.at(x, y, 0) = static_cast<std::uint8_t>(std::lround((1 - a) * overlay.at(x, y, 0) + a * 255));
      overlay.at(x, y, 1) = static_cast<std::uint8_t>(std::lround((1 - a) * overlay.at(x, y, 1)));
      overlay.at(x, y, 2) = static_cast<std::uint8_t>(std::lround((1 - a) * overlay.at(x, y, 2)));
    }

  if (pred_index) pred.draw_box(output.boxes.at(*pred_index), 2, {230, 20, 20});
  const Point2 peak = heatmap_peak(m);
  pred.fill_circle(peak.x * S, peak.y * H, 3.0, {230, 20, 20});
  gt.draw_box(sample.gaze_box(), 2, {20, 60, 230});
  gt.draw_box(sample.head_box(), 1, {250, 250, 250});

  canvas.blit(det, 0, 0);
  canvas.blit(overlay, S, 0);
  canvas.blit(pred, 0, H);
  canvas.blit(gt, S, H);
  return canvas;
}

void write_heatmap_raw(const std::filesystem::path& path, const Heatmap& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  for (double v : m.values()) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace gatector
