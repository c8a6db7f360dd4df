#pragma once

// Gaze branch with delayed head cues: the head-location mask only meets
// features that already left the shared backbone.

#include <array>

#include <nlohmann/json.hpp>

#include "gatector/nn/layers.hpp"

namespace gatector {

struct GazeHeadConfig {
  int image_size = 224;
  int feature_channels = 64;  // channels of f_gaze_scene / f_gaze_head
  std::array<int, 5> location_channels{4, 8, 16, 16, 16};
  int encoder_channels = 64;
  std::array<int, 3> decoder_channels{32, 16, 8};
  int heatmap_size = 64;

  int feature_size() const { return image_size / 32; }
  void validate() const;
};

void to_json(nlohmann::json& j, const GazeHeadConfig& c);
void from_json(const nlohmann::json& j, GazeHeadConfig& c);

class GazeHead {
 public:
  GazeHead() = default;
  GazeHead(nn::ParameterStore& store, const GazeHeadConfig& config);

  /// mask (N,1,S,S) -> (N, location_channels[4], S/32, S/32)
  nn::Var encode_head_location(const nn::Var& mask) const;
  /// mask (N,1,S,S), f_gaze_head (N,F,S/32,S/32) -> (N,1,S/32,S/32) in (0,1)
  nn::Var head_attention(const nn::Var& mask, const nn::Var& f_gaze_head) const;
  /// -> (N,1,heatmap,heatmap) in (0,1)
  nn::Var predict_heatmap(const nn::Var& f_gaze_scene, const nn::Var& location, const nn::Var& attention) const;

  struct Outputs {
    nn::Var location, attention, heatmap;
  };
  Outputs operator()(const nn::Var& f_gaze_scene, const nn::Var& f_gaze_head, const nn::Var& mask) const;

  const GazeHeadConfig& config() const { return config_; }

 private:
  GazeHeadConfig config_;
  std::array<nn::ConvNormAct, 5> location_;
  nn::Linear attention_fc_;
  std::array<nn::ConvNormAct, 2> encoder_;
  std::array<nn::ConvTranspose2d, 3> decoder_;
  std::array<nn::GroupNorm, 3> decoder_norm_;
  nn::Conv2d output_;
};

}  // namespace gatector
