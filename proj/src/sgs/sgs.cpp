#include "gatector/sgs/sgs.hpp"

namespace gatector {

const char* to_string(UpsampleMode m) { return m == UpsampleMode::kDefocus ? "defocus" : "interpolation"; }

UpsampleMode upsample_mode_from_string(const std::string& s) {
  if (s == "defocus") return UpsampleMode::kDefocus;
  if (s == "interpolation" || s == "bilinear") return UpsampleMode::kInterpolation;
  fail(ErrorKind::kConfig, "unknown upsample mode '" + s + "'");
}

std::array<int, 3> SgsConfig::detector_level_channels() const {
  std::array<int, 3> out{};
  const int r2 = defocus_ratio * defocus_ratio;
  for (int i = 0; i < 3; ++i) {
    const int c = backbone.block_channels[static_cast<std::size_t>(i) + 1];
    out[static_cast<std::size_t>(i)] = upsample == UpsampleMode::kDefocus ? c / r2 : c;
  }
  return out;
}

void SgsConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::kConfig, m); };
  if (image_size < 32 || image_size % 32 != 0) bad("image_size must be a positive multiple of 32");
  if (backbone.stem_channels < 1) bad("stem_channels must be positive");
  if (backbone.blocks_per_stage < 1) bad("blocks_per_stage must be positive");
  if (defocus_ratio < 2) bad("defocus ratio must be >= 2");
  if (gaze_channels < 1) bad("gaze_channels must be positive");
  const int r2 = defocus_ratio * defocus_ratio;
  for (std::size_t i = 0; i < 4; ++i) {
    if (backbone.block_channels[i] < 1) bad("backbone widths must be positive");
    if (i >= 1 && backbone.block_channels[i] % r2 != 0)
      bad("backbone width " + std::to_string(backbone.block_channels[i]) + " not divisible by r^2 = " +
          std::to_string(r2));
  }
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"stem_channels", c.stem_channels},
       {"block_channels", c.block_channels},
       {"blocks_per_stage", c.blocks_per_stage}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  c.stem_channels = j.value("stem_channels", c.stem_channels);
  if (j.contains("block_channels")) c.block_channels = j.at("block_channels").get<std::array<int, 4>>();
  c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
}

void to_json(nlohmann::json& j, const SgsConfig& c) {
  j = {{"image_size", c.image_size},
       {"backbone", c.backbone},
       {"gaze_channels", c.gaze_channels},
       {"defocus_ratio", c.defocus_ratio},
       {"input_specific", c.input_specific},
       {"gaze_specific", c.gaze_specific},
       {"upsample", to_string(c.upsample)}};
}

void from_json(const nlohmann::json& j, SgsConfig& c) {
  c.image_size = j.value("image_size", c.image_size);
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
  c.gaze_channels = j.value("gaze_channels", c.gaze_channels);
  c.defocus_ratio = j.value("defocus_ratio", c.defocus_ratio);
  c.input_specific = j.value("input_specific", c.input_specific);
  c.gaze_specific = j.value("gaze_specific", c.gaze_specific);
  if (j.contains("upsample")) c.upsample = upsample_mode_from_string(j.at("upsample").get<std::string>());
}

nn::Var upsample(const nn::Var& x, UpsampleMode mode, int ratio) {
  if (mode == UpsampleMode::kDefocus) return nn::defocus(x, ratio);
  const auto d = Dims4::of(x->value.shape());
  return nn::resize_bilinear(x, d.h * ratio, d.w * ratio);
}

ResidualBlock::ResidualBlock(nn::ParameterStore& store, const std::string& name, int in_channels, int out_channels,
                             int stride)
    : conv1_(store, name + ".conv1", in_channels, out_channels, 3, stride),
      conv2_(store, name + ".conv2", out_channels, out_channels, 3, 1, 1, false),
      norm2_(store, name + ".norm2", out_channels, true),
      project_(stride != 1 || in_channels != out_channels) {
  if (project_) {
    proj_conv_ = nn::Conv2d(store, name + ".proj.conv", in_channels, out_channels, 1, stride, 0, false);
    proj_norm_ = nn::GroupNorm(store, name + ".proj.norm", out_channels);
  }
}

nn::Var ResidualBlock::operator()(const nn::Var& x) const {
  nn::Var y = norm2_(conv2_(conv1_(x)));
  nn::Var skip = project_ ? proj_norm_(proj_conv_(x)) : x;
  return nn::relu(nn::add(y, skip));
}

SharedBackbone::SharedBackbone(nn::ParameterStore& store, const std::string& name, const BackboneConfig& config) {
  int in = config.stem_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    const int out = config.block_channels[s];
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      const std::string block = name + ".stage" + std::to_string(s + 2) + ".block" + std::to_string(b);
      stages_[s].emplace_back(store, block, in, out, b == 0 ? 2 : 1);
      in = out;
    }
  }
}

Pyramid SharedBackbone::operator()(const nn::Var& stem_features) const {
  std::array<nn::Var, 4> levels;
  nn::Var x = stem_features;
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& block : stages_[s]) x = block(x);
    levels[s] = x;
  }
  return {levels[0], levels[1], levels[2], levels[3]};
}

SgsExtractor::SgsExtractor(nn::ParameterStore& store, const SgsConfig& config, SgsVariant variant)
    : config_(config), variant_(variant) {
  config_.validate();
  const int stem = config_.backbone.stem_channels;
  scene_stem_ = nn::ConvNormAct(store, "sgs.psi_s", 3, stem, 7, 2);
  if (config_.input_specific) head_stem_ = nn::ConvNormAct(store, "sgs.psi_h", 3, stem, 7, 2);
  backbone_ = SharedBackbone(store, "sgs.backbone", config_.backbone);
  if (variant_ == SgsVariant::kTwoBackboneBaseline)
    head_backbone_ = SharedBackbone(store, "sgs.head_backbone", config_.backbone);
  if (config_.gaze_specific) {
    const int c5 = config_.backbone.block_channels[3];
    gaze_scene_ = nn::Conv2d(store, "sgs.phi_s", c5, config_.gaze_channels, 1, 1, 0);
    gaze_head_ = nn::Conv2d(store, "sgs.phi_h", c5, config_.gaze_channels, 1, 1, 0);
  }
}

std::pair<nn::Var, nn::Var> SgsExtractor::input_specific(const nn::Var& scene, const nn::Var& head) const {
  const Shape expected{scene->value.dim(0), 3, config_.image_size, config_.image_size};
  if (scene->value.shape() != expected || head->value.shape() != expected)
    fail(ErrorKind::kInvalidArgument, "sgs input must be " + shape_string(expected) + ", got scene " +
                                          shape_string(scene->value.shape()) + " and head " +
                                          shape_string(head->value.shape()));
  const auto& head_stem = config_.input_specific ? head_stem_ : scene_stem_;
  return {scene_stem_(scene), head_stem(head)};
}

void SgsExtractor::task_specific(SgsOutputs& out) const {
  const int r = config_.defocus_ratio;
  out.det_levels = {upsample(out.scene.c3, config_.upsample, r), upsample(out.scene.c4, config_.upsample, r),
                    upsample(out.scene.c5, config_.upsample, r)};
  out.f_det = out.det_levels[2];
  if (config_.gaze_specific) {
    out.f_gaze_scene = nn::relu(gaze_scene_(out.scene.c5));
    out.f_gaze_head = nn::relu(gaze_head_(out.head.c5));
  } else {
    out.f_gaze_scene = out.scene.c5;
    out.f_gaze_head = out.head.c5;
  }
}

SgsOutputs SgsExtractor::operator()(const nn::Var& scene, const nn::Var& head) const {
  SgsOutputs out;
  std::tie(out.scene_stem, out.head_stem) = input_specific(scene, head);
  out.scene = backbone_(out.scene_stem);
  out.head = variant_ == SgsVariant::kTwoBackboneBaseline ? head_backbone_(out.head_stem) : backbone_(out.head_stem);
  task_specific(out);
  return out;
}

std::size_t parameter_count(const SgsConfig& config, SgsVariant variant) {
  nn::ParameterStore store(0);
  SgsExtractor extractor(store, config, variant);
  return store.scalar_count();
}

}  // namespace gatector
