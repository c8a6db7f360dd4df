#include "gatector/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gatector {

void to_json(nlohmann::json& j, const StepLosses& s) {
  j = {{"step", s.step}, {"l_det", s.l_det}, {"l_gaze", s.l_gaze}, {"l_eng", s.l_eng}, {"total", s.total}};
}

void from_json(const nlohmann::json& j, StepLosses& s) {
  s.step = j.at("step").get<std::int64_t>();
  s.l_det = j.at("l_det").get<double>();
  s.l_gaze = j.at("l_gaze").get<double>();
  s.l_eng = j.at("l_eng").get<double>();
  s.total = j.at("total").get<double>();
}

StepLosses batch_losses(const GaTector& model, const GaTector::Outputs& out, const Batch& batch,
                        const GazeLossConfig& loss, std::vector<std::pair<nn::Var, Tensor>>* seeds) {
  const int n = batch.size();
  const auto& det_cfg = model.config().detection;
  const ImageSize image{model.image_size(), model.image_size()};
  const auto& w = loss.weights;
  const double inv_n = 1.0 / n;

  const Tensor& grid = out.grid->value;
  const Shape cell_shape{grid.dim(1), grid.dim(2), grid.dim(3)};
  const std::size_t per_grid = shape_size(cell_shape);
  const Tensor& hm = out.gaze.heatmap->value;
  const int rows = hm.dim(2), cols = hm.dim(3);
  const std::size_t per_map = static_cast<std::size_t>(rows) * cols;

  Tensor grid_grad, hm_grad;
  if (seeds) {
    grid_grad = Tensor(grid.shape());
    hm_grad = Tensor(hm.shape());
  }
  GazeLossConfig lc = loss;
  lc.heatmap_rows = rows;
  lc.heatmap_cols = cols;

  StepLosses s;
  for (int i = 0; i < n; ++i) {
    const ImageRecord& rec = batch.records[static_cast<std::size_t>(i)];
    Tensor g(cell_shape, std::vector<float>(grid.data() + i * per_grid, grid.data() + (i + 1) * per_grid));
    Tensor g_grad;
    const DetectionLoss dl = detection_loss(g, rec.boxes, det_cfg, model.stride(), seeds ? &g_grad : nullptr,
                                            w.det * inv_n);
    s.l_det += dl.total() * inv_n;

    Heatmap m({rows, cols});
    for (std::size_t k = 0; k < per_map; ++k) m[k] = hm[i * per_map + k];
    const Heatmap t = gaussian_gt_heatmap(rec.gaze_point, lc);
    const LossValue mse = gaze_mse_loss(m, t);
    const BoundingBox& gaze_box = rec.boxes.at(static_cast<std::size_t>(rec.gaze_box_index));
    const LossValue eng = energy_aggregation_loss(m, gaze_box, image, loss.energy_eps);
    s.l_gaze += mse.value * inv_n;
    s.l_eng += eng.value * inv_n;

    if (seeds) {
      std::copy(g_grad.values().begin(), g_grad.values().end(), grid_grad.data() + i * per_grid);
      for (std::size_t k = 0; k < per_map; ++k)
        hm_grad[i * per_map + k] = static_cast<float>(inv_n * (w.gaze * mse.grad[k] + w.eng * eng.grad[k]));
    }
  }
  for (auto [name, v] : {std::pair{"detection", s.l_det}, std::pair{"gaze", s.l_gaze}, std::pair{"energy", s.l_eng}})
    if (!std::isfinite(v)) fail(ErrorKind::kNumerical, std::string("non-finite ") + name + " loss");
  s.total = total_loss(s.l_det, s.l_gaze, s.l_eng, w);
  if (seeds) {
    seeds->emplace_back(out.grid, std::move(grid_grad));
    seeds->emplace_back(out.gaze.heatmap, std::move(hm_grad));
  }
  return s;
}

Trainer::Trainer(RunConfig config, std::vector<Sample> samples) : config_(std::move(config)), samples_(std::move(samples)) {
  config_.validate();
  if (samples_.empty()) fail(ErrorKind::kData, "training set is empty");
  for (const auto& s : samples_)
    if (s.scene.width() != config_.model.sgs.image_size || s.scene.height() != config_.model.sgs.image_size)
      fail(ErrorKind::kData, "sample " + s.record.image_id + " is " + std::to_string(s.scene.width()) + "x" +
                                 std::to_string(s.scene.height()) + ", model expects " +
                                 std::to_string(config_.model.sgs.image_size));
  config_.loss.heatmap_rows = config_.loss.heatmap_cols = config_.model.gaze.heatmap_size;
  model_ = std::make_unique<GaTector>(config_.model, config_.seed);
  adam_ = std::make_unique<nn::Adam>(model_->parameters(), nn::AdamConfig{.lr = config_.optimizer.lr});
}

std::unique_ptr<Trainer> Trainer::resume(const Checkpoint& ckpt, std::vector<Sample> samples) {
  auto t = std::make_unique<Trainer>(ckpt.config.get<RunConfig>(), std::move(samples));
  restore_parameters(t->model_->parameters(), ckpt.params);
  for (auto& [name, m] : t->adam_->first_moments()) {
    const auto it = ckpt.adam_m.find(name);
    if (it == ckpt.adam_m.end()) fail(ErrorKind::kData, "checkpoint lacks optimizer state for '" + name + "'");
    m = it->second;
  }
  for (auto& [name, v] : t->adam_->second_moments()) {
    const auto it = ckpt.adam_v.find(name);
    if (it == ckpt.adam_v.end()) fail(ErrorKind::kData, "checkpoint lacks optimizer state for '" + name + "'");
    v = it->second;
  }
  t->adam_->set_steps(ckpt.adam_steps);
  t->step_ = ckpt.step;
  for (const auto& h : ckpt.history) t->history_.push_back(h.get<StepLosses>());
  return t;
}

std::int64_t Trainer::steps_per_epoch() const {
  const auto n = static_cast<std::int64_t>(samples_.size());
  return (n + config_.optimizer.batch_size - 1) / config_.optimizer.batch_size;
}

std::int64_t Trainer::total_steps() const {
  if (config_.optimizer.max_steps > 0) return config_.optimizer.max_steps;
  return steps_per_epoch() * config_.optimizer.epochs;
}

std::vector<std::size_t> Trainer::batch_indices(std::int64_t t) const {
  const std::int64_t epoch = t / steps_per_epoch(), pos = t % steps_per_epoch();
  std::vector<std::size_t> order(samples_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t b = static_cast<std::size_t>(config_.optimizer.batch_size);
  const std::size_t begin = static_cast<std::size_t>(pos) * b;
  const std::size_t end = std::min(begin + b, order.size());
  return {order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

StepLosses Trainer::step() {
  const auto idx = batch_indices(step_);
  std::vector<Sample> augmented;
  std::vector<const Sample*> ptrs;
  if (config_.augment) {
    augmented.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      augmented.push_back(augment_sample(samples_[idx[k]], config_.seed * 1000003u + static_cast<std::uint64_t>(step_) * 131u + k));
    for (const auto& s : augmented) ptrs.push_back(&s);
  } else {
    for (std::size_t i : idx) ptrs.push_back(&samples_[i]);
  }
  const Batch batch = make_batch(ptrs);

  model_->parameters().zero_grad();
  const auto out = model_->forward(batch);
  std::vector<std::pair<nn::Var, Tensor>> seeds;
  StepLosses s;
  try {
    s = batch_losses(*model_, out, batch, config_.loss, &seeds);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNumerical)
      fail(ErrorKind::kNumerical, std::string(e.what()) + " at step " + std::to_string(step_));
    throw;
  }
  nn::backward(seeds);
  adam_->step();
  s.step = step_++;
  history_.push_back(s);
  return s;
}

void Trainer::run(std::ostream* log, const std::function<void(const StepLosses&)>& on_step) {
  const auto ckpt_path = resolve_output(config_.output_dir) / "checkpoint.bin";
  while (step_ < total_steps()) {
    const StepLosses s = step();
    if (log && (s.step % config_.log_every == 0 || step_ == total_steps()))
      *log << nlohmann::json(s).dump() << std::endl;
    if (on_step) on_step(s);
    if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) save(ckpt_path);
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.params = snapshot_parameters(model_->parameters());
  c.adam_m = adam_->first_moments();
  c.adam_v = adam_->second_moments();
  c.adam_steps = adam_->steps();
  c.step = step_;
  c.epoch = step_ / steps_per_epoch();
  c.history = history_;
  return c;
}

std::unique_ptr<GaTector> model_from_checkpoint(const Checkpoint& ckpt) {
  const auto cfg = ckpt.config.get<RunConfig>();
  auto model = std::make_unique<GaTector>(cfg.model, cfg.seed);
  restore_parameters(model->parameters(), ckpt.params);
  return model;
}

}  // namespace gatector
