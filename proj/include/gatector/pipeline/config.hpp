#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gatector/detection/detection.hpp"
#include "gatector/gaze/gaze_head.hpp"
#include "gatector/losses/gaze_losses.hpp"
#include "gatector/sgs/sgs.hpp"

namespace gatector {

struct ModelConfig {
  SgsConfig sgs;
  DetectionConfig detection;
  GazeHeadConfig gaze;  // image_size and feature_channels follow sgs

  /// Copies the sgs-derived fields into `gaze` and validates everything.
  void finalize();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct OptimizerConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 20;
  std::int64_t max_steps = 0;  // 0: run all epochs
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

struct RunConfig {
  ModelConfig model;
  GazeLossConfig loss;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  std::string train_data;
  std::string eval_data;
  std::string output_dir = "run";
  std::int64_t checkpoint_every = 0;  // steps; 0: only at the end
  int log_every = 1;
  bool augment = false;  // random crop + colour jitter

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads a JSON config; unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);

/// Environment variable naming the root that relative output paths resolve against.
inline constexpr const char* kOutputRootEnv = "GATECTOR_OUTPUT_ROOT";

std::filesystem::path output_root();
std::filesystem::path resolve_output(const std::filesystem::path& p);

}  // namespace gatector
