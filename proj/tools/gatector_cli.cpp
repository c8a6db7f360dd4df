// gatector: data generation, training, evaluation and inspection.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gatector/defocus/flops.hpp"
#include "gatector/pipeline/checkpoint.hpp"
#include "gatector/pipeline/config.hpp"
#include "gatector/pipeline/evaluate.hpp"
#include "gatector/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace gatector;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kUsage = 2, kDataError = 3, kNumericalError = 4, kIoError = 5 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfig: return kUsage;
    case ErrorKind::kData: return kDataError;
    case ErrorKind::kNumerical: return kNumericalError;
    case ErrorKind::kIo: return kIoError;
  }
  return kOther;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
}

std::vector<Sample> load_samples(const std::string& dir) {
  if (dir.empty()) fail(ErrorKind::kConfig, "no dataset directory given");
  auto d = read_dataset(dir);
  if (d.samples.empty()) fail(ErrorKind::kData, "dataset '" + dir + "' has no samples");
  return std::move(d.samples);
}

BoundingBox parse_box(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidArgument, "bad box coordinate '" + part + "'");
    }
  }
  if (v.size() != 4) fail(ErrorKind::kInvalidArgument, "box must be x1,y1,x2,y2");
  BoundingBox b{v[0], v[1], v[2], v[3], 0, std::nullopt};
  if (!b.valid()) fail(ErrorKind::kInvalidArgument, "box '" + text + "' is empty or inverted");
  return b;
}

struct MakeDataArgs {
  std::string out;
  std::size_t count = 64;
  SceneSpec spec;
};

int make_data(const MakeDataArgs& a) {
  const fs::path dir = resolve_output(a.out);
  write_dataset(a.spec, a.count, dir);
  std::cout << nlohmann::json{{"dataset", dir.string()}, {"samples", a.count}}.dump() << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config, resume, data, output;
  std::int64_t max_steps = -1;
};

int train(const TrainArgs& a) {
  std::unique_ptr<Trainer> trainer;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(a.resume);
    auto cfg = ckpt.config.get<RunConfig>();
    if (!a.output.empty()) cfg.output_dir = a.output;
    if (a.max_steps >= 0) cfg.optimizer.max_steps = a.max_steps;
    ckpt.config = cfg;
    trainer = Trainer::resume(ckpt, load_samples(a.data.empty() ? cfg.train_data : a.data));
  } else {
    if (a.config.empty()) fail(ErrorKind::kConfig, "train needs --config or --resume");
    RunConfig cfg = load_run_config(a.config);
    if (!a.data.empty()) cfg.train_data = a.data;
    if (!a.output.empty()) cfg.output_dir = a.output;
    if (a.max_steps >= 0) cfg.optimizer.max_steps = a.max_steps;
    trainer = std::make_unique<Trainer>(cfg, load_samples(cfg.train_data));
  }
  const fs::path out = resolve_output(trainer->config().output_dir);
  fs::create_directories(out);
  std::ofstream log(out / "train_log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
  trainer->run(&std::cout, [&](const StepLosses& s) { log << nlohmann::json(s).dump() << '\n'; });
  trainer->save(out / "checkpoint.bin");
  std::cerr << "checkpoint: " << (out / "checkpoint.bin").string() << " (step " << trainer->steps_done() << ")\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, out = "eval";
  bool oracle = false;
  int batch = 8;
};

int eval(const EvalArgs& a) {
  const auto samples = load_samples(a.data);
  std::vector<SampleOutput> outputs;
  GazeLossConfig loss;
  double min_score = 0.0;
  if (a.oracle) {
    outputs = oracle_outputs(samples, loss);
  } else {
    if (a.checkpoint.empty()) fail(ErrorKind::kConfig, "eval needs --checkpoint (or --oracle)");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const auto cfg = ckpt.config.get<RunConfig>();
    loss = cfg.loss;
    min_score = cfg.model.detection.select_score_threshold;
    const auto model = model_from_checkpoint(ckpt);
    outputs = predict(*model, samples, a.batch);
  }
  const EvalResult r = evaluate_outputs(samples, outputs, loss, min_score);
  const fs::path out = resolve_output(a.out);
  write_json(out / "report.json", to_json(r));
  write_predictions(out / "predictions.jsonl", samples, outputs, r);
  std::cout << to_json(r).dump() << '\n';
  return kOk;
}

struct InferArgs {
  std::string checkpoint, image, head_box, out = "infer";
};

int infer_cmd(const InferArgs& a) {
  const auto model = model_from_checkpoint(load_checkpoint(a.checkpoint));
  const Image scene = read_png(a.image);
  const InferResult r = infer(*model, scene, parse_box(a.head_box));
  const fs::path out = resolve_output(a.out);
  fs::create_directories(out);
  write_heatmap_raw(out / "heatmap.f32", r.heatmap);
  write_png(out / "heatmap.png", heatmap_to_image(r.heatmap));
  write_json(out / "result.json", to_json(r));
  std::cout << to_json(r).dump() << '\n';
  return kOk;
}

struct VisualizeArgs {
  std::string checkpoint, data, id, out = "panel.png";
  bool oracle = false;
};

int visualize(const VisualizeArgs& a) {
  const auto samples = load_samples(a.data);
  std::size_t idx = 0;
  if (!a.id.empty()) {
    const auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.record.image_id == a.id; });
    if (it == samples.end()) fail(ErrorKind::kData, "no sample with id '" + a.id + "'");
    idx = static_cast<std::size_t>(it - samples.begin());
  }
  const std::span<const Sample> one(&samples[idx], 1);
  std::vector<SampleOutput> outputs;
  GazeLossConfig loss;
  double min_score = 0.0;
  if (a.oracle) {
    outputs = oracle_outputs(one, loss);
  } else {
    if (a.checkpoint.empty()) fail(ErrorKind::kConfig, "visualize needs --checkpoint (or --oracle)");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const auto cfg = ckpt.config.get<RunConfig>();
    loss = cfg.loss;
    min_score = cfg.model.detection.select_score_threshold;
    outputs = predict(*model_from_checkpoint(ckpt), one, 1);
  }
  const EvalResult r = evaluate_outputs(one, outputs, loss, min_score);
  const fs::path out = resolve_output(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, render_panels(samples[idx], outputs[0], r.samples[0].pred_gaze_index));
  std::cout << nlohmann::json{{"image_id", samples[idx].record.image_id}, {"panel", out.string()}}.dump() << '\n';
  return kOk;
}

struct FlopsArgs {
  std::string stages, config;
  bool three_heads = false;
};

int flops(const FlopsArgs& a) {
  std::vector<Stage> stages;
  if (!a.stages.empty()) {
    stages = stages_from_json(read_json_file(a.stages));
  } else {
    ModelConfig model;
    if (!a.config.empty()) model = load_run_config(a.config).model;
    stages = model_stages(model, a.three_heads);
  }
  std::cout << to_json(flop_count(stages)).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaze object prediction toolkit"};
  app.require_subcommand(1);

  MakeDataArgs md;
  auto* c_make = app.add_subcommand("make-data", "render a synthetic shelf dataset");
  c_make->add_option("--out", md.out, "dataset directory")->required();
  c_make->add_option("--count", md.count, "number of samples")->check(CLI::PositiveNumber);
  c_make->add_option("--seed", md.spec.seed, "generator seed");
  c_make->add_option("--grid", md.spec.grid, "products per shelf row and column");
  c_make->add_option("--categories", md.spec.num_categories, "product categories");
  c_make->add_option("--jitter", md.spec.jitter, "placement jitter in [0,1]");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a model");
  c_train->add_option("--config", tr.config, "run config (JSON)");
  c_train->add_option("--resume", tr.resume, "checkpoint to continue from");
  c_train->add_option("--data", tr.data, "override the training dataset");
  c_train->add_option("--output", tr.output, "override the output directory");
  c_train->add_option("--max-steps", tr.max_steps, "override optimizer.max_steps");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  c_eval->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
  c_eval->add_option("--data", ev.data, "dataset directory")->required();
  c_eval->add_option("--out", ev.out, "directory for report.json and predictions.jsonl");
  c_eval->add_option("--batch", ev.batch, "inference batch size")->check(CLI::PositiveNumber);
  c_eval->add_flag("--oracle", ev.oracle, "score ground-truth boxes and heatmaps instead of a model");

  InferArgs in;
  auto* c_infer = app.add_subcommand("infer", "predict boxes and a gaze heatmap for one image");
  c_infer->add_option("--checkpoint", in.checkpoint, "model checkpoint")->required();
  c_infer->add_option("--image", in.image, "scene PNG")->required();
  c_infer->add_option("--head-box", in.head_box, "x1,y1,x2,y2 in pixels")->required();
  c_infer->add_option("--out", in.out, "output directory");

  VisualizeArgs vi;
  auto* c_vis = app.add_subcommand("visualize", "render the four-panel figure for one sample");
  c_vis->add_option("--checkpoint", vi.checkpoint, "model checkpoint");
  c_vis->add_option("--data", vi.data, "dataset directory")->required();
  c_vis->add_option("--id", vi.id, "image id (default: first sample)");
  c_vis->add_option("--out", vi.out, "output PNG");
  c_vis->add_flag("--oracle", vi.oracle, "use ground truth instead of a model");

  FlopsArgs fl;
  auto* c_flops = app.add_subcommand("flops", "count multiply-accumulates");
  c_flops->add_option("--stages", fl.stages, "stage list (JSON)");
  c_flops->add_option("--config", fl.config, "run config whose model is counted");
  c_flops->add_flag("--three-heads", fl.three_heads, "count the multi-head detector variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*c_make) return make_data(md);
    if (*c_train) return train(tr);
    if (*c_eval) return eval(ev);
    if (*c_infer) return infer_cmd(in);
    if (*c_vis) return visualize(vi);
    if (*c_flops) return flops(fl);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
