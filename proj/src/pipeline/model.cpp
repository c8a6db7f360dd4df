#include "gatector/pipeline/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gatector {

Batch make_batch(std::span<const Sample* const> samples) {
  require(!samples.empty(), "make_batch: no samples");
  const int s = samples.front()->scene.width();
  const int n = static_cast<int>(samples.size());
  Batch b;
  b.scene = Tensor({n, 3, s, s});
  b.head = Tensor({n, 3, s, s});
  b.mask = Tensor({n, 1, s, s});
  const std::size_t image = static_cast<std::size_t>(3) * s * s, plane = static_cast<std::size_t>(s) * s;
  for (int i = 0; i < n; ++i) {
    const Sample& smp = *samples[static_cast<std::size_t>(i)];
    require(smp.scene.width() == s && smp.scene.height() == s && smp.head.width() == s && smp.head.height() == s,
            "make_batch: sample " + smp.record.image_id + " does not match the batch image size");
    const Tensor sc = image_to_tensor(smp.scene), hd = image_to_tensor(smp.head);
    const Tensor mk = head_mask(smp.head_box(), s);
    std::copy_n(sc.data(), image, b.scene.data() + i * image);
    std::copy_n(hd.data(), image, b.head.data() + i * image);
    std::copy_n(mk.data(), plane, b.mask.data() + i * plane);
    b.records.push_back(smp.record);
  }
  return b;
}

Sample augment_sample(const Sample& s, std::uint64_t seed, int max_shift) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  std::uniform_real_distribution<double> gain(0.85, 1.15), offset(-12.0, 12.0);
  const int dx = shift(rng), dy = shift(rng);
  const double g = gain(rng), o = offset(rng);
  const int w = s.scene.width(), h = s.scene.height();

  auto moved = [&](const BoundingBox& b) {
    BoundingBox m = b;
    m.x1 = std::clamp(b.x1 + dx, 0.0, static_cast<double>(w));
    m.x2 = std::clamp(b.x2 + dx, 0.0, static_cast<double>(w));
    m.y1 = std::clamp(b.y1 + dy, 0.0, static_cast<double>(h));
    m.y2 = std::clamp(b.y2 + dy, 0.0, static_cast<double>(h));
    return m;
  };
  // keep every annotated box and the head box fully inside the frame
  auto fits = [&](const BoundingBox& b) {
    return b.x1 + dx >= 0 && b.x2 + dx <= w && b.y1 + dy >= 0 && b.y2 + dy <= h;
  };
  bool ok = fits(s.head_box());
  for (const auto& b : s.record.boxes) ok = ok && fits(b);

  Sample out;
  out.record = s.record;
  out.scene = Image(w, h, 3);
  const int sx = ok ? dx : 0, sy = ok ? dy : 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int ix = std::clamp(x - sx, 0, w - 1), iy = std::clamp(y - sy, 0, h - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = g * s.scene.at(ix, iy, c) + o;
        out.scene.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  if (ok) {
    for (auto& b : out.record.boxes) b = moved(b);
    out.record.head_box = moved(s.head_box());
    const auto c = out.gaze_box().center();
    out.record.gaze_point = {c.x / w, c.y / h};
  }
  out.head = make_head_crop(out.scene, out.head_box());
  return out;
}

namespace {

ModelConfig finalized(ModelConfig c) {
  c.finalize();
  return c;
}

}  // namespace

GaTector::GaTector(const ModelConfig& config, std::uint64_t seed, SgsVariant variant)
    : config_(finalized(config)),
      store_(seed),
      sgs_(store_, config_.sgs, variant),
      detection_(store_, config_.detection, config_.sgs.detector_level_channels(), config_.sgs.upsample,
                 config_.sgs.defocus_ratio),
      gaze_(store_, config_.gaze) {}

GaTector::Outputs GaTector::forward(const nn::Var& scene, const nn::Var& head, const nn::Var& mask) const {
  Outputs out;
  out.features = sgs_(scene, head);
  out.grid = detection_(out.features.det_levels);
  // the mask joins only here, after the shared backbone
  out.gaze = gaze_(out.features.f_gaze_scene, out.features.f_gaze_head, mask);
  return out;
}

GaTector::Outputs GaTector::forward(const Batch& batch) const {
  return forward(nn::input(batch.scene, "scene"), nn::input(batch.head, "head"), nn::input(batch.mask, "mask"));
}

std::vector<Stage> model_stages(const ModelConfig& input, bool three_heads) {
  ModelConfig cfg = input;
  cfg.finalize();
  const int S = cfg.sgs.image_size;
  const auto& bb = cfg.sgs.backbone;
  std::vector<Stage> st;
  auto conv = [&](const std::string& name, int cin, int cout, int k, int h_out) {
    st.push_back({name, StageKind::kConv, cin, cout, k, 0, 0, h_out, h_out});
  };
  auto up = [&](const std::string& name, int c, int h_in) {
    const int r = cfg.sgs.defocus_ratio;
    if (cfg.sgs.upsample == UpsampleMode::kDefocus)
      st.push_back({name, StageKind::kDefocus, c, c / (r * r), 1, h_in, h_in, h_in * r, h_in * r, r});
    else
      st.push_back({name, StageKind::kInterpolation, c, c, 1, h_in, h_in, h_in * r, h_in * r, r, "bilinear"});
  };
  auto up_channels = [&](int c) {
    const int r = cfg.sgs.defocus_ratio;
    return cfg.sgs.upsample == UpsampleMode::kDefocus ? c / (r * r) : c;
  };

  for (const char* branch : {"scene", "head"}) {
    const std::string b = branch;
    conv(b + ".stem", 3, bb.stem_channels, 7, S / 2);
    int in = bb.stem_channels, res = S / 2;
    for (int s = 0; s < 4; ++s) {
      const int out = bb.block_channels[static_cast<std::size_t>(s)];
      res /= 2;
      for (int k = 0; k < bb.blocks_per_stage; ++k) {
        const std::string name = b + ".stage" + std::to_string(s + 2) + ".block" + std::to_string(k);
        conv(name + ".conv1", in, out, 3, res);
        conv(name + ".conv2", out, out, 3, res);
        if (k == 0) conv(name + ".proj", in, out, 1, res);
        in = out;
      }
    }
    if (cfg.sgs.gaze_specific) conv(b + ".phi", bb.block_channels[3], cfg.sgs.gaze_channels, 1, S / 32);
  }
  up("det.p3", bb.block_channels[1], S / 8);
  up("det.p4", bb.block_channels[2], S / 16);
  up("det.p5", bb.block_channels[3], S / 32);

  const auto lv = cfg.sgs.detector_level_channels();
  const auto& nk = cfg.detection.neck_channels;
  conv("det.neck.n5", lv[2], nk[0], 3, S / 16);
  up("det.neck.up5", nk[0], S / 16);
  conv("det.neck.n4", up_channels(nk[0]) + lv[1], nk[1], 3, S / 8);
  up("det.neck.up4", nk[1], S / 8);
  conv("det.neck.n3", up_channels(nk[1]) + lv[0], nk[2], 3, S / 4);
  conv("det.predict", nk[2], cfg.detection.grid_channels(), 1, S / 4);
  if (three_heads) {
    conv("det.predict_n4", nk[1], cfg.detection.grid_channels(), 1, S / 8);
    conv("det.predict_n5", nk[0], cfg.detection.grid_channels(), 1, S / 16);
  }

  const auto& g = cfg.gaze;
  int in = 1, res = S;
  for (int k = 0; k < 5; ++k) {
    res /= 2;
    conv("gaze.location" + std::to_string(k), in, g.location_channels[static_cast<std::size_t>(k)], 3, res);
    in = g.location_channels[static_cast<std::size_t>(k)];
  }
  const int fs = S / 32;
  st.push_back({"gaze.attention_fc", StageKind::kLinear, (S / 8) * (S / 8) + g.feature_channels, fs * fs});
  conv("gaze.encoder0", g.feature_channels + g.location_channels[4], g.encoder_channels, 3, fs);
  conv("gaze.encoder1", g.encoder_channels, g.encoder_channels, 3, fs);
  in = g.encoder_channels;
  res = fs;
  for (int k = 0; k < 3; ++k) {
    const int out = g.decoder_channels[static_cast<std::size_t>(k)];
    st.push_back({"gaze.decoder" + std::to_string(k), StageKind::kDeconv, in, out, 4, res, res, 2 * res, 2 * res});
    in = out;
    res *= 2;
  }
  conv("gaze.output", in, 1, 1, res);
  if (res != g.heatmap_size)
    st.push_back({"gaze.resize", StageKind::kInterpolation, 1, 1, 1, res, res, g.heatmap_size, g.heatmap_size, 2,
                  "bilinear"});
  return st;
}

}  // namespace gatector
