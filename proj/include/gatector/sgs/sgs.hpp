#pragma once

// Specific-general-specific feature extractor.
//
//   scene, head images --(input-specific stems)--> stem features
//   stem features     --(ONE shared backbone)-->  pyramids {C2..C5}
//   scene pyramid     --(Defocus)-->              detector levels P3, P4, P5
//   C5 scene / C5 head --(gaze-specific 1x1)-->   gaze features
//
// The head-location mask never enters this module.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/nn/layers.hpp"

namespace gatector {

enum class UpsampleMode { kDefocus, kInterpolation };

const char* to_string(UpsampleMode m);
UpsampleMode upsample_mode_from_string(const std::string& s);

struct BackboneConfig {
  int stem_channels = 16;
  std::array<int, 4> block_channels{16, 32, 64, 128};  // C2..C5
  int blocks_per_stage = 2;
};

struct SgsConfig {
  int image_size = 224;
  BackboneConfig backbone;
  int gaze_channels = 64;
  int defocus_ratio = 2;
  // ablation switches
  bool input_specific = true;  // false: scene and head share one stem
  bool gaze_specific = true;   // false: C5 feeds the gaze branch directly
  UpsampleMode upsample = UpsampleMode::kDefocus;

  /// Channel count of the gaze features handed to the gaze head.
  int gaze_feature_channels() const { return gaze_specific ? gaze_channels : backbone.block_channels[3]; }
  /// Channels of detector levels P3, P4, P5.
  std::array<int, 3> detector_level_channels() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
void to_json(nlohmann::json& j, const SgsConfig& c);
void from_json(const nlohmann::json& j, SgsConfig& c);

/// Applies Defocus, or bilinear x ratio when the interpolation ablation is on.
nn::Var upsample(const nn::Var& x, UpsampleMode mode, int ratio);

struct Pyramid {
  nn::Var c2, c3, c4, c5;
};

class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(nn::ParameterStore& store, const std::string& name, int in_channels, int out_channels, int stride);
  nn::Var operator()(const nn::Var& x) const;

 private:
  nn::ConvNormAct conv1_;
  nn::Conv2d conv2_;
  nn::GroupNorm norm2_;
  bool project_ = false;
  nn::Conv2d proj_conv_;
  nn::GroupNorm proj_norm_;
};

/// Four residual stages, each halving resolution.
class SharedBackbone {
 public:
  SharedBackbone() = default;
  SharedBackbone(nn::ParameterStore& store, const std::string& name, const BackboneConfig& config);
  Pyramid operator()(const nn::Var& stem_features) const;

 private:
  std::array<std::vector<ResidualBlock>, 4> stages_;
};

struct SgsOutputs {
  nn::Var scene_stem, head_stem;
  Pyramid scene, head;
  std::array<nn::Var, 3> det_levels;  // P3, P4, P5 (upsampled C3, C4, C5)
  nn::Var f_det;                      // == det_levels[2]
  nn::Var f_gaze_scene, f_gaze_head;
};

enum class SgsVariant { kShared, kTwoBackboneBaseline };

class SgsExtractor {
 public:
  SgsExtractor(nn::ParameterStore& store, const SgsConfig& config, SgsVariant variant = SgsVariant::kShared);

  /// scene, head: (N, 3, S, S)
  std::pair<nn::Var, nn::Var> input_specific(const nn::Var& scene, const nn::Var& head) const;
  Pyramid shared_backbone(const nn::Var& stem_features) const { return backbone_(stem_features); }
  void task_specific(SgsOutputs& out) const;
  SgsOutputs operator()(const nn::Var& scene, const nn::Var& head) const;

  const SgsConfig& config() const { return config_; }
  SgsVariant variant() const { return variant_; }

 private:
  SgsConfig config_;
  SgsVariant variant_;
  nn::ConvNormAct scene_stem_, head_stem_;
  SharedBackbone backbone_;
  SharedBackbone head_backbone_;  // baseline variant only
  nn::Conv2d gaze_scene_, gaze_head_;
};

/// Trainable scalars of the extractor alone for the given variant.
std::size_t parameter_count(const SgsConfig& config, SgsVariant variant);

}  // namespace gatector
