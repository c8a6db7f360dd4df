#include "gatector/detection/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gatector/geometry/metrics.hpp"

namespace gatector {

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

constexpr double kMaxLogSize = 8.0;

}  // namespace

void AnchorSet::validate() const {
  if (sizes.empty()) fail(ErrorKind::kConfig, "anchor set is empty");
  for (const auto& [w, h] : sizes)
    if (!(w > 0 && h > 0)) fail(ErrorKind::kConfig, "anchor sizes must be positive");
}

void DetectionConfig::validate() const {
  anchors.validate();
  if (num_classes < 1) fail(ErrorKind::kConfig, "num_classes must be >= 1");
  for (int c : neck_channels)
    if (c < 1) fail(ErrorKind::kConfig, "neck widths must be positive");
  if (!(nms_iou > 0 && nms_iou < 1)) fail(ErrorKind::kConfig, "nms_iou must be in (0,1)");
  if (top_k < 1) fail(ErrorKind::kConfig, "top_k must be >= 1");
  if (!(select_score_threshold >= 0 && select_score_threshold < 1))
    fail(ErrorKind::kConfig, "select_score_threshold must be in [0,1)");
}

void to_json(nlohmann::json& j, const AnchorSet& a) {
  j = nlohmann::json::array();
  for (const auto& [w, h] : a.sizes) j.push_back({w, h});
}

void from_json(const nlohmann::json& j, AnchorSet& a) {
  a.sizes.clear();
  for (const auto& e : j) a.sizes.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
}

void to_json(nlohmann::json& j, const DetectionConfig& c) {
  j = {{"num_classes", c.num_classes},   {"anchors", c.anchors}, {"neck_channels", c.neck_channels},
       {"score_threshold", c.score_threshold}, {"select_score_threshold", c.select_score_threshold}, {"nms_iou", c.nms_iou}, {"top_k", c.top_k},
       {"ignore_iou", c.ignore_iou}};
}

void from_json(const nlohmann::json& j, DetectionConfig& c) {
  c.num_classes = j.value("num_classes", c.num_classes);
  if (j.contains("anchors")) c.anchors = j.at("anchors").get<AnchorSet>();
  if (j.contains("neck_channels")) c.neck_channels = j.at("neck_channels").get<std::array<int, 3>>();
  c.score_threshold = j.value("score_threshold", c.score_threshold);
  c.select_score_threshold = j.value("select_score_threshold", c.select_score_threshold);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  c.top_k = j.value("top_k", c.top_k);
  c.ignore_iou = j.value("ignore_iou", c.ignore_iou);
}

DetectionHead::DetectionHead(nn::ParameterStore& store, const DetectionConfig& config,
                             std::array<int, 3> level_channels, UpsampleMode upsample, int ratio)
    : upsample_(upsample), ratio_(ratio) {
  config.validate();
  const int r2 = ratio * ratio;
  auto up_channels = [&](int c) {
    if (upsample != UpsampleMode::kDefocus) return c;
    if (c % r2 != 0) fail(ErrorKind::kConfig, "neck width " + std::to_string(c) + " not divisible by r^2");
    return c / r2;
  };
  const auto [c3, c4, c5] = level_channels;
  n5_ = nn::ConvNormAct(store, "det.neck.n5", c5, config.neck_channels[0], 3, 1);
  n4_ = nn::ConvNormAct(store, "det.neck.n4", up_channels(config.neck_channels[0]) + c4, config.neck_channels[1], 3, 1);
  n3_ = nn::ConvNormAct(store, "det.neck.n3", up_channels(config.neck_channels[1]) + c3, config.neck_channels[2], 3, 1);
  predict_ = nn::Conv2d(store, "det.predict", config.neck_channels[2], config.grid_channels(), 1, 1, 0);
  // rare-positive prior on objectness
  auto bias = store.find("det.predict.bias");
  for (int a = 0; a < config.anchors.count(); ++a) bias->value[static_cast<std::size_t>(a * config.channels_per_anchor() + 4)] = -4.6f;
}

nn::Var DetectionHead::operator()(const std::array<nn::Var, 3>& levels) const {
  nn::Var n5 = n5_(levels[2]);
  nn::Var n4 = n4_(nn::concat_channels({upsample(n5, upsample_, ratio_), levels[1]}));
  nn::Var n3 = n3_(nn::concat_channels({upsample(n4, upsample_, ratio_), levels[0]}));
  return predict_(n3);
}

BoundingBox from_params(const BoxParams& p, int category_id) {
  return box_from_center(p.cx, p.cy, p.w, p.h, category_id);
}

BoxParams decode_offsets(const CellOffsets& t, int i, int j, double stride, std::pair<double, double> anchor) {
  return {(j + sigmoid(t.tx)) * stride, (i + sigmoid(t.ty)) * stride,
          anchor.first * std::exp(std::min(t.tw, kMaxLogSize)), anchor.second * std::exp(std::min(t.th, kMaxLogSize))};
}

CellOffsets encode_box(const BoxParams& box, int i, int j, double stride, std::pair<double, double> anchor) {
  auto logit = [](double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
  };
  return {logit(box.cx / stride - j), logit(box.cy / stride - i), std::log(box.w / anchor.first),
          std::log(box.h / anchor.second)};
}

std::vector<BoundingBox> decode_boxes(const Tensor& grid, const AnchorSet& anchors, int num_classes, ImageSize image,
                                      double score_threshold) {
  require(grid.rank() == 3, "decode_boxes expects a (A*(5+C), H, W) grid");
  const int per = 5 + num_classes;
  require(grid.dim(0) == anchors.count() * per, "grid channels " + std::to_string(grid.dim(0)) +
                                                    " do not match anchors x (5 + classes)");
  const int gh = grid.dim(1), gw = grid.dim(2);
  const double stride = grid_stride(image.width, gw);
  const double stride_y = grid_stride(image.height, gh);
  std::vector<BoundingBox> out;
  for (int a = 0; a < anchors.count(); ++a) {
    const int base = a * per;
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        for (int k = 0; k < per; ++k)
          if (!std::isfinite(grid.at(base + k, i, j)))
            fail(ErrorKind::kNumerical, "non-finite detection logit");
        const double obj = sigmoid(grid.at(base + 4, i, j));
        int best_c = 0;
        double best_s = -1.0;
        for (int c = 0; c < num_classes; ++c) {
          const double s = sigmoid(grid.at(base + 5 + c, i, j));
          if (s > best_s) best_s = s, best_c = c;
        }
        const double score = obj * best_s;
        if (score <= score_threshold) continue;
        const CellOffsets t{grid.at(base, i, j), grid.at(base + 1, i, j), grid.at(base + 2, i, j),
                            grid.at(base + 3, i, j)};
        BoxParams p = decode_offsets(t, i, j, stride, anchors.sizes[static_cast<std::size_t>(a)]);
        p.cy = (i + sigmoid(t.ty)) * stride_y;
        BoundingBox b = from_params(p, best_c);
        b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image.width));
        b.x2 = std::clamp(b.x2, 0.0, static_cast<double>(image.width));
        b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image.height));
        b.y2 = std::clamp(b.y2, 0.0, static_cast<double>(image.height));
        b.score = score;
        if (b.valid()) out.push_back(b);
      }
    }
  }
  return out;
}

CiouTerms ciou_loss(const BoxParams& p, const BoxParams& g) {
  require(p.w > 0 && p.h > 0 && g.w > 0 && g.h > 0, "ciou_loss needs positive box sizes");
  CiouTerms r;
  const double px1 = p.cx - p.w / 2, px2 = p.cx + p.w / 2, py1 = p.cy - p.h / 2, py2 = p.cy + p.h / 2;
  const double gx1 = g.cx - g.w / 2, gx2 = g.cx + g.w / 2, gy1 = g.cy - g.h / 2, gy2 = g.cy + g.h / 2;

  // d(px1, px2, py1, py2) / d(cx, cy, w, h)
  using V4 = std::array<double, 4>;
  const V4 dpx1{1, 0, -0.5, 0}, dpx2{1, 0, 0.5, 0}, dpy1{0, 1, 0, -0.5}, dpy2{0, 1, 0, 0.5};
  auto comb = [](const V4& a, double sa, const V4& b, double sb) {
    V4 o{};
    for (int k = 0; k < 4; ++k) o[k] = sa * a[k] + sb * b[k];
    return o;
  };

  const double ix = std::min(px2, gx2) - std::max(px1, gx1);
  const double iy = std::min(py2, gy2) - std::max(py1, gy1);
  const double iw = std::max(ix, 0.0), ih = std::max(iy, 0.0);
  const V4 d_iw = ix > 0 ? comb(dpx2, px2 < gx2 ? 1.0 : 0.0, dpx1, px1 > gx1 ? -1.0 : 0.0) : V4{};
  const V4 d_ih = iy > 0 ? comb(dpy2, py2 < gy2 ? 1.0 : 0.0, dpy1, py1 > gy1 ? -1.0 : 0.0) : V4{};
  const double inter = iw * ih;
  const double uni = p.w * p.h + g.w * g.h - inter;
  r.iou = inter / uni;
  V4 d_iou{};
  for (int k = 0; k < 4; ++k) {
    const double d_inter = d_iw[k] * ih + iw * d_ih[k];
    const double d_area = (k == 2 ? p.h : 0.0) + (k == 3 ? p.w : 0.0);
    const double d_uni = d_area - d_inter;
    d_iou[k] = (d_inter * uni - inter * d_uni) / (uni * uni);
  }

  const double dx = p.cx - g.cx, dy = p.cy - g.cy;
  r.rho2 = dx * dx + dy * dy;
  const V4 d_rho2{2 * dx, 2 * dy, 0, 0};
  const double cw = std::max(px2, gx2) - std::min(px1, gx1);
  const double ch = std::max(py2, gy2) - std::min(py1, gy1);
  const V4 d_cw = comb(dpx2, px2 >= gx2 ? 1.0 : 0.0, dpx1, px1 <= gx1 ? -1.0 : 0.0);
  const V4 d_ch = comb(dpy2, py2 >= gy2 ? 1.0 : 0.0, dpy1, py1 <= gy1 ? -1.0 : 0.0);
  r.diag2 = cw * cw + ch * ch;

  const double k4 = 4.0 / (std::numbers::pi * std::numbers::pi);
  const double dang = std::atan(g.w / g.h) - std::atan(p.w / p.h);
  r.v = k4 * dang * dang;
  const double s2 = p.w * p.w + p.h * p.h;
  // d atan(w/h) = (h dw - w dh) / (w^2 + h^2)
  const V4 d_v{0, 0, -2 * k4 * dang * (p.h / s2), 2 * k4 * dang * (p.w / s2)};
  const double denom = (1.0 - r.iou) + r.v;
  r.alpha = denom > 0 ? r.v / denom : 0.0;

  r.loss = 1.0 - r.iou + r.rho2 / r.diag2 + r.alpha * r.v;
  for (int k = 0; k < 4; ++k) {
    const double d_dist = (d_rho2[k] * r.diag2 - r.rho2 * (2 * cw * d_cw[k] + 2 * ch * d_ch[k])) / (r.diag2 * r.diag2);
    r.grad[k] = -d_iou[k] + d_dist + r.alpha * d_v[k];
  }
  return r;
}

Assignment assign_targets(std::span<const BoundingBox> gts, const AnchorSet& anchors, int grid_h, int grid_w,
                          double stride, double ignore_iou) {
  Assignment as;
  as.grid_h = grid_h;
  as.grid_w = grid_w;
  const int na = anchors.count();
  const std::size_t cells = static_cast<std::size_t>(grid_h) * grid_w;
  as.role.assign(cells * na, AnchorRole::kNegative);
  as.gt_index.assign(cells * na, -1);
  auto index = [&](int a, int i, int j) { return (static_cast<std::size_t>(a) * grid_h + i) * grid_w + j; };

  for (std::size_t g = 0; g < gts.size(); ++g) {
    const auto c = gts[g].center();
    const int j = std::clamp(static_cast<int>(std::floor(c.x / stride)), 0, grid_w - 1);
    const int i = std::clamp(static_cast<int>(std::floor(c.y / stride)), 0, grid_h - 1);
    int best = 0;
    double best_iou = -1.0;
    for (int a = 0; a < na; ++a) {
      const auto [aw, ah] = anchors.sizes[static_cast<std::size_t>(a)];
      const double inter = std::min(aw, gts[g].width()) * std::min(ah, gts[g].height());
      const double v = inter / (aw * ah + gts[g].area() - inter);
      if (v > best_iou) best_iou = v, best = a;
    }
    const std::size_t k = index(best, i, j);
    if (as.role[k] == AnchorRole::kPositive) continue;
    as.role[k] = AnchorRole::kPositive;
    as.gt_index[k] = static_cast<int>(g);
    ++as.positives;
  }

  if (gts.empty()) return as;
  for (int a = 0; a < na; ++a) {
    const auto [aw, ah] = anchors.sizes[static_cast<std::size_t>(a)];
    for (int i = 0; i < grid_h; ++i) {
      for (int j = 0; j < grid_w; ++j) {
        const std::size_t k = index(a, i, j);
        if (as.role[k] == AnchorRole::kPositive) continue;
        const BoundingBox box = box_from_center((j + 0.5) * stride, (i + 0.5) * stride, aw, ah);
        for (const auto& g : gts) {
          if (std::abs(g.center().x - (j + 0.5) * stride) > 0.5 * (aw + g.width())) continue;
          if (std::abs(g.center().y - (i + 0.5) * stride) > 0.5 * (ah + g.height())) continue;
          if (iou(box, g) > ignore_iou) {
            as.role[k] = AnchorRole::kIgnore;
            break;
          }
        }
      }
    }
  }
  return as;
}

double bce_with_logit(double z, double target) {
  return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

DetectionLoss detection_loss(const Tensor& grid, std::span<const BoundingBox> gts, const DetectionConfig& config,
                             double stride, Tensor* grad, double grad_scale) {
  require(grid.rank() == 3 && grid.dim(0) == config.grid_channels(),
          "detection_loss: grid shape " + shape_string(grid.shape()) + " does not match config");
  const int gh = grid.dim(1), gw = grid.dim(2), na = config.anchors.count(), per = config.channels_per_anchor();
  const int nc = config.num_classes;
  const Assignment as = assign_targets(gts, config.anchors, gh, gw, stride, config.ignore_iou);

  if (grad) *grad = Tensor(grid.shape());
  DetectionLoss out;
  out.positives = as.positives;
  const double obj_norm = 1.0 / std::max(as.positives, 1);
  const double pos_norm = as.positives > 0 ? 1.0 / as.positives : 0.0;

  for (int a = 0; a < na; ++a) {
    const int base = a * per;
    const auto anchor = config.anchors.sizes[static_cast<std::size_t>(a)];
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        const std::size_t k = (static_cast<std::size_t>(a) * gh + i) * gw + j;
        const AnchorRole role = as.role[k];
        if (role == AnchorRole::kIgnore) continue;
        const double p = grid.at(base + 4, i, j);
        const double o = role == AnchorRole::kPositive ? 1.0 : 0.0;
        out.obj += obj_norm * bce_with_logit(p, o);
        if (grad) grad->at(base + 4, i, j) = static_cast<float>(grad_scale * obj_norm * (sigmoid(p) - o));
        if (role != AnchorRole::kPositive) continue;

        const BoundingBox& g = gts[static_cast<std::size_t>(as.gt_index[k])];
        for (int c = 0; c < nc; ++c) {
          const double s = grid.at(base + 5 + c, i, j);
          const double y = c == g.category_id ? 1.0 : 0.0;
          out.cls += pos_norm * bce_with_logit(s, y) / nc;
          if (grad) grad->at(base + 5 + c, i, j) = static_cast<float>(grad_scale * pos_norm * (sigmoid(s) - y) / nc);
        }

        const CellOffsets t{grid.at(base, i, j), grid.at(base + 1, i, j), grid.at(base + 2, i, j),
                            grid.at(base + 3, i, j)};
        const BoxParams pred = decode_offsets(t, i, j, stride, anchor);
        const CiouTerms ci = ciou_loss(pred, to_params(g));
        out.reg += pos_norm * ci.loss;
        if (grad) {
          const double sx = sigmoid(t.tx), sy = sigmoid(t.ty);
          const double dtx = ci.grad[0] * stride * sx * (1 - sx);
          const double dty = ci.grad[1] * stride * sy * (1 - sy);
          const double dtw = t.tw < kMaxLogSize ? ci.grad[2] * pred.w : 0.0;
          const double dth = t.th < kMaxLogSize ? ci.grad[3] * pred.h : 0.0;
          const double s = grad_scale * pos_norm;
          grad->at(base, i, j) = static_cast<float>(s * dtx);
          grad->at(base + 1, i, j) = static_cast<float>(s * dty);
          grad->at(base + 2, i, j) = static_cast<float>(s * dtw);
          grad->at(base + 3, i, j) = static_cast<float>(s * dth);
        }
      }
    }
  }
  return out;
}

}  // namespace gatector
