#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatector/nn/adam.hpp"
#include "gatector/pipeline/checkpoint.hpp"
#include "gatector/pipeline/model.hpp"

namespace gatector {

struct StepLosses {
  std::int64_t step = 0;
  double l_det = 0, l_gaze = 0, l_eng = 0, total = 0;
};

void to_json(nlohmann::json& j, const StepLosses& s);
void from_json(const nlohmann::json& j, StepLosses& s);

/// Batch-mean losses of a forward pass. When `seeds` is given, appends the
/// gradient seeds (grid, heatmap) that make backward() differentiate `total`.
StepLosses batch_losses(const GaTector& model, const GaTector::Outputs& out, const Batch& batch,
                        const GazeLossConfig& loss, std::vector<std::pair<nn::Var, Tensor>>* seeds = nullptr);

class Trainer {
 public:
  Trainer(RunConfig config, std::vector<Sample> samples);
  /// Continues from a checkpoint; the run config is taken from the checkpoint.
  static std::unique_ptr<Trainer> resume(const Checkpoint& ckpt, std::vector<Sample> samples);

  /// One optimizer step on the next batch of the deterministic schedule.
  StepLosses step();
  /// Steps until the configured epochs / max_steps are done. Loss lines go to `log`.
  void run(std::ostream* log, const std::function<void(const StepLosses&)>& on_step = {});

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const { save_checkpoint(path, checkpoint()); }

  std::int64_t steps_done() const { return step_; }
  std::int64_t total_steps() const;
  std::int64_t steps_per_epoch() const;
  const RunConfig& config() const { return config_; }
  GaTector& model() { return *model_; }
  const std::vector<StepLosses>& history() const { return history_; }

  /// Sample indices of the batch used at global step `t`.
  std::vector<std::size_t> batch_indices(std::int64_t t) const;

 private:
  RunConfig config_;
  std::vector<Sample> samples_;
  std::unique_ptr<GaTector> model_;
  std::unique_ptr<nn::Adam> adam_;
  std::int64_t step_ = 0;
  std::vector<StepLosses> history_;
};

/// Builds a model from a checkpoint's config and parameters.
std::unique_ptr<GaTector> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace gatector
