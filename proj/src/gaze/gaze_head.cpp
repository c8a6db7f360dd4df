#include "gatector/gaze/gaze_head.hpp"

#include <algorithm>

namespace gatector {

void GazeHeadConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::kConfig, m); };
  if (image_size < 32 || image_size % 32 != 0) bad("gaze head image_size must be a multiple of 32");
  if (feature_channels < 1 || encoder_channels < 1) bad("gaze head widths must be positive");
  for (int c : location_channels)
    if (c < 1) bad("location encoder widths must be positive");
  for (int c : decoder_channels)
    if (c < 1) bad("decoder widths must be positive");
  if (heatmap_size < 1) bad("heatmap_size must be positive");
}

void to_json(nlohmann::json& j, const GazeHeadConfig& c) {
  j = {{"location_channels", c.location_channels},
       {"encoder_channels", c.encoder_channels},
       {"decoder_channels", c.decoder_channels},
       {"heatmap_size", c.heatmap_size}};
}

void from_json(const nlohmann::json& j, GazeHeadConfig& c) {
  if (j.contains("location_channels")) c.location_channels = j.at("location_channels").get<std::array<int, 5>>();
  c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
  if (j.contains("decoder_channels")) c.decoder_channels = j.at("decoder_channels").get<std::array<int, 3>>();
  c.heatmap_size = j.value("heatmap_size", c.heatmap_size);
}

GazeHead::GazeHead(nn::ParameterStore& store, const GazeHeadConfig& config) : config_(config) {
  config_.validate();
  int in = 1;
  for (std::size_t k = 0; k < 5; ++k) {
    location_[k] = nn::ConvNormAct(store, "gaze.location" + std::to_string(k), in, config_.location_channels[k], 3, 2);
    in = config_.location_channels[k];
  }
  const int pooled = config_.image_size / 8;
  const int fs = config_.feature_size();
  attention_fc_ = nn::Linear(store, "gaze.attention_fc", pooled * pooled + config_.feature_channels, fs * fs);

  const int fused = config_.feature_channels + config_.location_channels[4];
  encoder_[0] = nn::ConvNormAct(store, "gaze.encoder0", fused, config_.encoder_channels, 3, 1);
  encoder_[1] = nn::ConvNormAct(store, "gaze.encoder1", config_.encoder_channels, config_.encoder_channels, 3, 1);
  in = config_.encoder_channels;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string name = "gaze.decoder" + std::to_string(k);
    decoder_[k] = nn::ConvTranspose2d(store, name + ".deconv", in, config_.decoder_channels[k], 4, 2, 1, false);
    decoder_norm_[k] = nn::GroupNorm(store, name + ".norm", config_.decoder_channels[k]);
    in = config_.decoder_channels[k];
  }
  output_ = nn::Conv2d(store, "gaze.output", in, 1, 1, 1, 0);
}

nn::Var GazeHead::encode_head_location(const nn::Var& mask) const {
  const auto d = Dims4::of(mask->value.shape());
  require(d.c == 1 && d.h == config_.image_size && d.w == config_.image_size,
          "head mask must be (N,1," + std::to_string(config_.image_size) + "," + std::to_string(config_.image_size) +
              "), got " + shape_string(mask->value.shape()));
  for (int n = 0; n < d.n; ++n) {
    const float* p = mask->value.data() + static_cast<std::size_t>(n) * d.plane();
    if (std::none_of(p, p + d.plane(), [](float v) { return v > 0.0f; }))
      fail(ErrorKind::kInvalidArgument, "head location mask is empty");
  }
  nn::Var x = mask;
  for (const auto& layer : location_) x = layer(x);
  return x;
}

nn::Var GazeHead::head_attention(const nn::Var& mask, const nn::Var& f_gaze_head) const {
  const int n = mask->value.dim(0);
  nn::Var m = mask;
  for (int k = 0; k < 3; ++k) m = nn::max_pool2d(m, 2, 2);
  const int pooled = m->value.dim(2) * m->value.dim(3);
  m = nn::reshape(m, {n, pooled, 1, 1});
  nn::Var head = nn::global_avg_pool(f_gaze_head);
  nn::Var logits = attention_fc_(nn::concat_channels({m, head}));
  const int fs = config_.feature_size();
  return nn::sigmoid(nn::reshape(logits, {n, 1, fs, fs}));
}

nn::Var GazeHead::predict_heatmap(const nn::Var& f_gaze_scene, const nn::Var& location,
                                  const nn::Var& attention) const {
  nn::Var x = nn::mul_channel_broadcast(nn::concat_channels({f_gaze_scene, location}), attention);
  for (const auto& layer : encoder_) x = layer(x);
  for (std::size_t k = 0; k < 3; ++k) x = nn::relu(decoder_norm_[k](decoder_[k](x)));
  x = output_(x);
  const int hm = config_.heatmap_size;
  if (x->value.dim(2) != hm || x->value.dim(3) != hm) x = nn::resize_bilinear(x, hm, hm);
  return nn::sigmoid(x);
}

GazeHead::Outputs GazeHead::operator()(const nn::Var& f_gaze_scene, const nn::Var& f_gaze_head,
                                       const nn::Var& mask) const {
  Outputs out;
  out.location = encode_head_location(mask);
  out.attention = head_attention(mask, f_gaze_head);
  out.heatmap = predict_heatmap(f_gaze_scene, out.location, out.attention);
  return out;
}

}  // namespace gatector
