#include "gatector/geometry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace gatector {

namespace {

void check_box(const BoundingBox& b, const char* what) {
  require(b.valid(), std::string(what) + ": invalid bounding box");
}

void check_heatmap(const Heatmap& m, const char* what) {
  require(m.rank() == 2, std::string(what) + ": heatmap must be 2-D, got " + shape_string(m.shape()));
}

}  // namespace

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double union_area(const BoundingBox& a, const BoundingBox& b) { return a.area() + b.area() - intersection_area(a, b); }

BoundingBox closure(const BoundingBox& a, const BoundingBox& b) {
  return BoundingBox{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2),
                     a.category_id, std::nullopt};
}

double iou(const BoundingBox& p, const BoundingBox& g) {
  check_box(p, "iou");
  check_box(g, "iou");
  return intersection_area(p, g) / union_area(p, g);
}

double uoc(const BoundingBox& p, const BoundingBox& g) {
  check_box(p, "uoc");
  check_box(g, "uoc");
  return union_area(p, g) / closure(p, g).area();
}

double size_similarity(const BoundingBox& p, const BoundingBox& g) {
  const double ap = p.area(), ag = g.area();
  return std::min(ap / ag, ag / ap);
}

double wuoc(const BoundingBox& p, const BoundingBox& g) {
  check_box(p, "wuoc");
  check_box(g, "wuoc");
  return size_similarity(p, g) * union_area(p, g) / closure(p, g).area();
}

std::vector<std::size_t> nms_indices(std::span<const BoundingBox> boxes, double iou_threshold, int top_k) {
  require(iou_threshold > 0.0 && iou_threshold < 1.0, "nms: iou_threshold must be in (0,1)");
  require(top_k >= 1, "nms: top_k must be >= 1");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (const auto& b : boxes) {
    require(b.score.has_value(), "nms: every box needs a score");
    check_box(b, "nms");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *boxes[a].score > *boxes[b].score; });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const auto& cand = boxes[idx];
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (boxes[k].category_id == cand.category_id && iou(boxes[k], cand) >= iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(idx);
      if (static_cast<int>(kept.size()) == top_k) break;
    }
  }
  return kept;
}

std::vector<BoundingBox> nms(std::span<const BoundingBox> boxes, double iou_threshold, int top_k) {
  std::vector<BoundingBox> out;
  for (std::size_t i : nms_indices(boxes, iou_threshold, top_k)) out.push_back(boxes[i]);
  return out;
}

double average_precision(std::span<const ImageDetections> images, double iou_threshold) {
  struct Det {
    std::size_t image;
    std::size_t index;
    double score;
  };
  std::map<int, std::vector<Det>> dets;
  std::map<int, int> gt_count;
  for (std::size_t im = 0; im < images.size(); ++im) {
    for (const auto& g : images[im].ground_truth) ++gt_count[g.category_id];
    const auto& preds = images[im].predictions;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      require(preds[i].score.has_value(), "average_precision: predictions need scores");
      dets[preds[i].category_id].push_back({im, i, *preds[i].score});
    }
  }
  if (gt_count.empty()) return 0.0;

  double sum = 0.0;
  for (const auto& [category, n_gt] : gt_count) {
    auto& list = dets[category];
    std::stable_sort(list.begin(), list.end(), [](const Det& a, const Det& b) { return a.score > b.score; });
    std::vector<std::vector<bool>> matched(images.size());
    for (std::size_t im = 0; im < images.size(); ++im) matched[im].assign(images[im].ground_truth.size(), false);

    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const auto& d : list) {
      const auto& pred = images[d.image].predictions[d.index];
      const auto& gts = images[d.image].ground_truth;
      double best = -1.0;
      int best_gt = -1;
      for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        if (gts[gi].category_id != category || matched[d.image][gi]) continue;
        const double v = iou(pred, gts[gi]);
        if (v >= iou_threshold && v > best) {
          best = v;
          best_gt = static_cast<int>(gi);
        }
      }
      if (best_gt >= 0) {
        matched[d.image][static_cast<std::size_t>(best_gt)] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / n_gt);
    }
    // precision envelope, then sample at 101 recall levels
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      auto it = std::lower_bound(recall.begin(), recall.end(), level - 1e-12);
      if (it != recall.end()) ap += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    sum += ap / 101.0;
  }
  return sum / static_cast<double>(gt_count.size());
}

ApSummary ap_summary(std::span<const ImageDetections> images) {
  ApSummary s;
  double total = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double thr = 0.5 + 0.05 * t;
    const double ap = average_precision(images, thr);
    total += ap;
    if (t == 0) s.ap50 = ap;
    if (t == 5) s.ap75 = ap;
  }
  s.ap = total / 10.0;
  return s;
}

CellRange box_cells(const BoundingBox& b, int rows, int cols, ImageSize image) {
  require(rows >= 1 && cols >= 1, "box_cells: empty grid");
  require(image.width > 0 && image.height > 0, "box_cells: image size must be positive");
  const double sx = static_cast<double>(image.width) / cols;
  const double sy = static_cast<double>(image.height) / rows;
  CellRange r;
  r.col0 = cols;
  r.row0 = rows;
  for (int j = 0; j < cols; ++j) {
    const double c = (j + 0.5) * sx;
    if (c >= b.x1 && c <= b.x2) {
      r.col0 = std::min(r.col0, j);
      r.col1 = j;
    }
  }
  for (int i = 0; i < rows; ++i) {
    const double c = (i + 0.5) * sy;
    if (c >= b.y1 && c <= b.y2) {
      r.row0 = std::min(r.row0, i);
      r.row1 = i;
    }
  }
  return r;
}

double box_mean_energy(const Heatmap& m, const BoundingBox& b, ImageSize image) {
  check_heatmap(m, "box_mean_energy");
  check_box(b, "box_mean_energy");
  const CellRange r = box_cells(b, m.dim(0), m.dim(1), image);
  require(r.count() > 0, "box_mean_energy: box covers no heatmap cell (smaller than one cell)");
  double sum = 0.0;
  for (int i = r.row0; i <= r.row1; ++i)
    for (int j = r.col0; j <= r.col1; ++j) sum += m.at(i, j);
  return sum / r.count();
}

std::size_t select_gaze_object_index(const Heatmap& m, std::span<const BoundingBox> boxes, ImageSize image) {
  require(!boxes.empty(), "select_gaze_object: no candidate boxes");
  std::size_t best = 0;
  double best_energy = box_mean_energy(m, boxes[0], image);
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    const double e = box_mean_energy(m, boxes[i], image);
    if (e > best_energy || (e == best_energy && boxes[i].score_or(0.0) > boxes[best].score_or(0.0))) {
      best = i;
      best_energy = e;
    }
  }
  return best;
}

BoundingBox select_gaze_object(const Heatmap& m, std::span<const BoundingBox> boxes, ImageSize image) {
  return boxes[select_gaze_object_index(m, boxes, image)];
}

double gaze_auc(const Heatmap& m, const Heatmap& gt_binary) {
  check_heatmap(m, "gaze_auc");
  require(m.same_shape(gt_binary), "gaze_auc: heatmap and ground truth grids differ");
  const std::size_t n = m.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m[a] < m[b]; });
  double rank_sum_pos = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && m[order[j]] == m[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      const double label = gt_binary[order[k]];
      require(label == 0.0 || label == 1.0, "gaze_auc: ground truth must be binary");
      if (label == 1.0) {
        rank_sum_pos += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  require(pos > 0 && neg > 0, "gaze_auc: ground truth needs both positive and negative cells");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

Point2 heatmap_peak(const Heatmap& m) {
  check_heatmap(m, "heatmap_peak");
  const auto it = std::max_element(m.values().begin(), m.values().end());
  const auto idx = static_cast<std::size_t>(it - m.values().begin());
  const int cols = m.dim(1);
  const int i = static_cast<int>(idx / cols), j = static_cast<int>(idx % cols);
  return {(j + 0.5) / cols, (i + 0.5) / m.dim(0)};
}

double l2_distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double angular_error(const GazeVector& pred, const GazeVector& gt) {
  const double px = pred.target.x - pred.origin.x, py = pred.target.y - pred.origin.y;
  const double gx = gt.target.x - gt.origin.x, gy = gt.target.y - gt.origin.y;
  const double np = std::hypot(px, py), ng = std::hypot(gx, gy);
  require(np > 0.0 && ng > 0.0, "angular_error: zero-length gaze vector");
  const double c = std::clamp((px * gx + py * gy) / (np * ng), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"auc", r.auc},     {"l2_dist", r.l2_dist}, {"angular_err", r.angular_err}, {"ap", r.ap},
       {"ap50", r.ap50},   {"ap75", r.ap75},       {"wuoc_mean", r.wuoc_mean},     {"sample_count", r.sample_count}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  j.at("auc").get_to(r.auc);
  j.at("l2_dist").get_to(r.l2_dist);
  j.at("angular_err").get_to(r.angular_err);
  j.at("ap").get_to(r.ap);
  j.at("ap50").get_to(r.ap50);
  j.at("ap75").get_to(r.ap75);
  j.at("wuoc_mean").get_to(r.wuoc_mean);
  j.at("sample_count").get_to(r.sample_count);
}

}  // namespace gatector
