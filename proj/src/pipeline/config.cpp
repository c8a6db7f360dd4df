#include "gatector/pipeline/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace gatector {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::kConfig, where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) fail(ErrorKind::kConfig, "unknown key '" + key + "' in " + where);
}

}  // namespace

void ModelConfig::finalize() {
  sgs.validate();
  detection.validate();
  gaze.image_size = sgs.image_size;
  gaze.feature_channels = sgs.gaze_feature_channels();
  gaze.validate();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"sgs", c.sgs}, {"detection", c.detection}, {"gaze", c.gaze}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  reject_unknown(j, {"sgs", "detection", "gaze"}, "model");
  if (j.contains("sgs")) c.sgs = j.at("sgs").get<SgsConfig>();
  if (j.contains("detection")) c.detection = j.at("detection").get<DetectionConfig>();
  if (j.contains("gaze")) c.gaze = j.at("gaze").get<GazeHeadConfig>();
  c.finalize();
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"type", "adam"}, {"lr", c.lr}, {"batch_size", c.batch_size}, {"epochs", c.epochs}, {"max_steps", c.max_steps}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  reject_unknown(j, {"type", "lr", "batch_size", "epochs", "max_steps"}, "optimizer");
  if (j.value("type", std::string("adam")) != "adam") fail(ErrorKind::kConfig, "only the adam optimizer is supported");
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
}

void RunConfig::validate() const {
  if (!(optimizer.lr > 0)) fail(ErrorKind::kConfig, "optimizer.lr must be > 0");
  if (optimizer.batch_size < 1) fail(ErrorKind::kConfig, "optimizer.batch_size must be >= 1");
  if (optimizer.epochs < 1 && optimizer.max_steps < 1) fail(ErrorKind::kConfig, "need epochs >= 1 or max_steps >= 1");
  if (log_every < 1) fail(ErrorKind::kConfig, "log_every must be >= 1");
  if (checkpoint_every < 0) fail(ErrorKind::kConfig, "checkpoint_every must be >= 0");
  loss.validate();
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"model", c.model},
       {"loss", c.loss},
       {"optimizer", c.optimizer},
       {"seed", c.seed},
       {"train_data", c.train_data},
       {"eval_data", c.eval_data},
       {"output_dir", c.output_dir},
       {"checkpoint_every", c.checkpoint_every},
       {"log_every", c.log_every},
       {"augment", c.augment}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j,
                 {"model", "loss", "optimizer", "seed", "train_data", "eval_data", "output_dir", "checkpoint_every",
                  "log_every", "augment"},
                 "config");
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  c.model.finalize();
  if (j.contains("loss")) c.loss = j.at("loss").get<GazeLossConfig>();
  c.loss.heatmap_rows = c.loss.heatmap_cols = c.model.gaze.heatmap_size;
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  c.seed = j.value("seed", c.seed);
  c.train_data = j.value("train_data", c.train_data);
  c.eval_data = j.value("eval_data", c.eval_data);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.augment = j.value("augment", c.augment);
  c.validate();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, "invalid config '" + path.string() + "': " + e.what());
  }
}

std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

std::filesystem::path resolve_output(const std::filesystem::path& p) {
  return p.is_absolute() ? p : output_root() / p;
}

}  // namespace gatector
