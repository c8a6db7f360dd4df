#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gatector/defocus/flops.hpp"
#include "gatector/pipeline/config.hpp"
#include "gatector/scenes/scenes.hpp"

namespace gatector {

/// Network inputs for a batch of samples.
struct Batch {
  Tensor scene;  // (N,3,S,S)
  Tensor head;   // (N,3,S,S)
  Tensor mask;   // (N,1,S,S)
  std::vector<ImageRecord> records;

  int size() const { return scene.dim(0); }
};

Batch make_batch(std::span<const Sample* const> samples);

/// Random crop (shift of up to `max_shift` px, edge-filled) and per-image
/// brightness/contrast jitter; boxes, gaze point and head box follow the shift.
Sample augment_sample(const Sample& s, std::uint64_t seed, int max_shift = 8);

class GaTector {
 public:
  GaTector(const ModelConfig& config, std::uint64_t seed, SgsVariant variant = SgsVariant::kShared);
  GaTector(const GaTector&) = delete;
  GaTector& operator=(const GaTector&) = delete;

  struct Outputs {
    SgsOutputs features;
    nn::Var grid;  // (N, A*(5+C), G, G)
    GazeHead::Outputs gaze;
  };

  Outputs forward(const nn::Var& scene, const nn::Var& head, const nn::Var& mask) const;
  Outputs forward(const Batch& batch) const;

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const ModelConfig& config() const { return config_; }
  int image_size() const { return config_.sgs.image_size; }
  int grid_size() const { return config_.sgs.image_size / 4; }
  double stride() const { return 4.0; }

 private:
  ModelConfig config_;
  nn::ParameterStore store_;
  SgsExtractor sgs_;
  DetectionHead detection_;
  GazeHead gaze_;
};

/// Per-layer MAC accounting of the full model. `three_heads` adds the two
/// coarser prediction layers a multi-scale detector would carry.
std::vector<Stage> model_stages(const ModelConfig& config, bool three_heads = false);

}  // namespace gatector
