// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "gatector/defocus/defocus.hpp"
#include "gatector/defocus/flops.hpp"
#include "gatector/detection/detection.hpp"
#include "gatector/losses/gaze_losses.hpp"
#include "gatector/nn/ops.hpp"
#include "gatector/pipeline/evaluate.hpp"
#include "gatector/pipeline/train.hpp"
#include "oracles.hpp"

namespace {

using namespace gatector;
using Clock = std::chrono::steady_clock;

/// Collects failed checks of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  bool ok() const { return failed_ == 0; }
  int count() const { return count_; }
  int failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  int count_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> d(-10, 10);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// ---- 1 --------------------------------------------------------------------

void defocus_correctness(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> small(1, 4);
  for (int t = 0; t < 1000; ++t) {
    const int r = t % 3 == 0 ? 3 : 2;
    const Tensor x = random_tensor({small(rng), r * r * small(rng), small(rng) + 1, small(rng) + 1}, rng);
    const Tensor y = defocus(x, r);
    c.expect(focus(y, r) == x, "focus(defocus(x)) != x at trial " + std::to_string(t));
    auto a = x.storage(), b = y.storage();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    c.expect(a == b, "multiset differs at trial " + std::to_string(t));
  }

  // Jacobian on (4,2,2): finite differences of the double-precision map vs autograd rows
  const int n = 16;
  std::vector<std::vector<double>> fd(n, std::vector<double>(n)), an(n, std::vector<double>(n));
  const TensorD base({4, 2, 2});
  for (int k = 0; k < n; ++k) {
    const double h = 1e-3;
    TensorD up = base, down = base;
    up[static_cast<std::size_t>(k)] += h;
    down[static_cast<std::size_t>(k)] -= h;
    const TensorD yu = defocus(up, 2), yd = defocus(down, 2);
    for (int o = 0; o < n; ++o) fd[o][k] = (yu[static_cast<std::size_t>(o)] - yd[static_cast<std::size_t>(o)]) / (2 * h);
  }
  for (int o = 0; o < n; ++o) {
    auto x = nn::parameter(Tensor({1, 4, 2, 2}));
    auto y = nn::defocus(x, 2);
    Tensor seed(y->value.shape());
    seed[static_cast<std::size_t>(o)] = 1.0f;
    nn::backward(y, seed);
    for (int k = 0; k < n; ++k) an[o][k] = x->grad[static_cast<std::size_t>(k)];
  }
  for (int o = 0; o < n; ++o) {
    int ones_row = 0, ones_col = 0;
    for (int k = 0; k < n; ++k) {
      c.near(an[o][k], fd[o][k], 1e-6, "Jacobian entry");
      c.expect(an[o][k] == 0.0 || an[o][k] == 1.0, "Jacobian entry not 0/1");
      ones_row += an[o][k] == 1.0;
      ones_col += an[k][o] == 1.0;
    }
    c.expect(ones_row == 1 && ones_col == 1, "Jacobian is not a permutation");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + std::to_string(secs) + " s");
}

// ---- 2 --------------------------------------------------------------------

BoundingBox random_box(std::mt19937_64& rng, double extent = 100) {
  std::uniform_real_distribution<double> pos(0, extent), size(0.5, extent / 2);
  const double x = pos(rng), y = pos(rng);
  return make_box(x, y, x + size(rng), y + size(rng));
}

void wuoc_oracle(Check& c) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10000; ++t) {
    const auto p = random_box(rng), g = random_box(rng);
    const double w = wuoc(p, g);
    c.near(w, oracle::wuoc(p, g), 1e-9, "wuoc vs oracle");
    c.expect(w == wuoc(g, p), "wuoc not symmetric");
    c.expect(w > 0 && w <= 1, "wuoc out of (0,1]");
  }
  const auto a = make_box(0, 0, 10, 10);
  c.expect(wuoc(a, a) == 1.0, "identity example");
  c.near(wuoc(a, make_box(20, 0, 30, 10)), 200.0 / 300.0, 1e-15, "gap example");
  c.expect(std::round(wuoc(a, make_box(20, 0, 30, 10)) * 1e4) / 1e4 == 0.6667, "gap example to 4 places");
  c.expect(wuoc(a, make_box(0, 0, 10, 20)) == 0.5, "nested half-area example");
}

// ---- 3 --------------------------------------------------------------------

void energy_loss(Check& c) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const Heatmap flat({64, 64}, 0.42);
  for (int t = 0; t < 100; ++t) {
    const double x = u(rng) * 180, y = u(rng) * 180;
    const auto b = make_box(x, y, x + 6 + u(rng) * 40, y + 6 + u(rng) * 40);
    c.near(energy_aggregation_loss(flat, b, {224, 224}).value, -1.0, 1e-9, "uniform heatmap");

    Heatmap m({64, 64});
    for (auto& v : m.values()) v = u(rng);
    const double scale = 1e-3 + 1e3 * u(rng);
    Heatmap s = m;
    for (auto& v : s.values()) v *= scale;
    c.near(energy_aggregation_loss(s, b, {224, 224}).value, energy_aggregation_loss(m, b, {224, 224}).value, 1e-9,
           "scale invariance");
  }
  for (int t = 0; t < 10; ++t) {
    Heatmap m({8, 8});
    for (auto& v : m.values()) v = 0.05 + u(rng);
    const auto b = make_box(u(rng) * 12, u(rng) * 12, 18 + u(rng) * 14, 18 + u(rng) * 14);
    const auto l = energy_aggregation_loss(m, b, {32, 32});
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double h = 1e-6, old = m[k];
      m[k] = old + h;
      const double up = energy_aggregation_loss(m, b, {32, 32}).value;
      m[k] = old - h;
      const double down = energy_aggregation_loss(m, b, {32, 32}).value;
      m[k] = old;
      c.near(l.grad[k], (up - down) / (2 * h), 1e-4, "energy gradient");
    }
  }
  Heatmap spot({64, 64});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) spot.at(i, j) = 1.0;
  c.expect(energy_aggregation_loss(spot, make_box(0, 0, 14, 14), {224, 224}).value == -256.0,
           "concentrated mass example");
}

// ---- 4 --------------------------------------------------------------------

void ciou(Check& c) {
  c.near(ciou_loss({5, 5, 10, 10}, {5, 5, 10, 10}).loss, 0.0, 1e-9, "identical boxes");
  c.near(ciou_loss({10, 10, 10, 10}, {10, 10, 20, 20}).loss, 0.75, 1e-9, "concentric 10x10 vs 20x20");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0, 60), size(1, 40);
  for (int t = 0; t < 1000; ++t) {
    const BoxParams p{pos(rng), pos(rng), size(rng), size(rng)}, g{pos(rng), pos(rng), size(rng), size(rng)};
    const auto got = ciou_loss(p, g);
    const auto want = oracle::ciou(p.cx, p.cy, p.w, p.h, g.cx, g.cy, g.w, g.h);
    c.near(got.iou, want.iou, 1e-7, "iou term");
    c.near(got.rho2 / got.diag2, want.center, 1e-7, "centre term");
    c.near(got.alpha * got.v, want.aspect, 1e-7, "aspect term");
    c.near(got.loss, want.loss, 1e-7, "loss");
  }
  std::uniform_real_distribution<double> pos2(10, 50), size2(4, 30);
  for (int t = 0; t < 300; ++t) {
    const double p[4] = {pos2(rng), pos2(rng), size2(rng), size2(rng)};
    const double g[4] = {pos2(rng), pos2(rng), size2(rng), size2(rng)};
    const auto got = ciou_loss({p[0], p[1], p[2], p[3]}, {g[0], g[1], g[2], g[3]});
    auto f = [&](int k, double d) {
      double q[4] = {p[0], p[1], p[2], p[3]};
      q[k] += d;
      const auto o = oracle::ciou(q[0], q[1], q[2], q[3], g[0], g[1], g[2], g[3]);
      return 1 - o.iou + o.center + got.alpha * o.v;
    };
    for (int k = 0; k < 4; ++k) {
      const double h = 1e-6;
      const double left = (f(k, 0) - f(k, -h)) / h, right = (f(k, h) - f(k, 0)) / h;
      if (std::abs(left - right) > 1e-4) continue;  // edge coincidence: one-sided slopes differ
      const double fd = (f(k, h) - f(k, -h)) / (2 * h);
      c.expect(std::abs(got.grad[static_cast<std::size_t>(k)] - fd) <= 1e-3 * std::max(1.0, std::abs(fd)),
               "regression gradient component " + std::to_string(k));
    }
  }
}

// ---- 5 --------------------------------------------------------------------

void gaussian_heatmap(Check& c) {
  const GazeLossConfig cfg;
  for (int r = 0; r < 64; ++r)
    for (int col = 0; col < 64; ++col) {
      const Point2 q{(col + 0.5) / 64, (r + 0.5) / 64};
      const Heatmap t = gaussian_gt_heatmap(q, cfg);
      const auto it = std::max_element(t.values().begin(), t.values().end());
      c.expect(t.at(r, col) == 1.0 && *it == 1.0, "peak at quantized cell");
      if (col + 1 < 64) c.near(t.at(r, col + 1), std::exp(-1.0 / 18.0), 1e-6, "neighbour ratio");
    }
}

// ---- 6 --------------------------------------------------------------------

RunConfig toy_config() {
  RunConfig cfg;
  cfg.optimizer.batch_size = 2;
  cfg.optimizer.lr = 1e-3;
  cfg.model.finalize();
  return cfg;
}

void sgs_structure(Check& c) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> mult(1, 8), blocks(1, 3), stem(4, 32), gaze(8, 96);
  for (int t = 0; t < 20; ++t) {
    SgsConfig s;
    s.backbone.stem_channels = stem(rng);
    for (auto& w : s.backbone.block_channels) w = 4 * mult(rng);
    s.backbone.blocks_per_stage = blocks(rng);
    s.gaze_channels = gaze(rng);
    c.expect(parameter_count(s, SgsVariant::kShared) < parameter_count(s, SgsVariant::kTwoBackboneBaseline),
             "shared extractor not smaller than two-backbone baseline");
  }

  std::vector<Sample> samples{generate_sample(SceneSpec{}, 0), generate_sample(SceneSpec{}, 1)};
  Trainer trainer(toy_config(), samples);
  trainer.step();
  const GaTector& model = trainer.model();
  std::vector<nn::Var> backbone;
  for (const auto& [name, p] : model.parameters().entries()) {
    c.expect(name.find("head_backbone") == std::string::npos, "second backbone present");
    if (name.rfind("sgs.backbone", 0) == 0) backbone.push_back(p);
  }
  c.expect(!backbone.empty(), "no backbone parameters");

  const Sample* ptrs[] = {&samples[0], &samples[1]};
  const Batch batch = make_batch(ptrs);
  const auto mask = nn::input(batch.mask);
  const auto out = model.forward(nn::input(batch.scene), nn::input(batch.head), mask);
  // the scene and head passes read the very same parameter nodes, so their values are bitwise equal
  for (const auto& p : backbone) {
    c.expect(nn::depends_on(out.features.scene.c5, p) && nn::depends_on(out.features.head.c5, p),
             "backbone parameter not used by both passes");
  }
  const auto& f = out.features;
  for (const auto& v : {f.scene_stem, f.head_stem, f.scene.c2, f.scene.c3, f.scene.c4, f.scene.c5, f.head.c2,
                        f.head.c3, f.head.c4, f.head.c5})
    c.expect(!nn::depends_on(v, mask), "head-location mask reaches the backbone");
  c.expect(nn::depends_on(out.gaze.heatmap, mask), "mask does not reach the gaze head");
}

// ---- 7 --------------------------------------------------------------------

void cost_direction(Check& c) {
  for (int ch : {4, 16, 64, 256, 2048})
    for (int h : {1, 7, 14, 28}) {
      const Stage d{"d", StageKind::kDefocus, ch, ch / 4, 1, h, h, 2 * h, 2 * h, 2};
      const Stage i{"i", StageKind::kInterpolation, ch, ch, 1, h, h, 2 * h, 2 * h, 2, "bilinear"};
      c.expect(stage_macs(d) < stage_macs(i), "defocus not cheaper than interpolation");
    }
  ModelConfig m;
  m.finalize();
  const auto single = flop_count(model_stages(m)).total_macs;
  c.expect(single < flop_count(model_stages(m, true)).total_macs, "single head not cheaper than three heads");
  m.sgs.upsample = UpsampleMode::kInterpolation;
  c.expect(single < flop_count(model_stages(m)).total_macs, "defocus model not cheaper than interpolation model");
}

// ---- 8 --------------------------------------------------------------------

void metric_oracles(Check& c) {
  // every instance of up to five boxes drawn from a fixed pool, each box either
  // ground truth or a prediction ranked by position
  const std::vector<BoundingBox> pool{make_box(0, 0, 10, 10, 0), make_box(1, 0, 11, 10, 0), make_box(20, 20, 30, 30, 0),
                                      make_box(0, 0, 10, 10, 1)};
  int instances = 0;
  for (int n = 1; n <= 5; ++n) {
    int combos = 1;
    for (int k = 0; k < n; ++k) combos *= 8;
    for (int code = 0; code < combos; ++code) {
      std::vector<ImageDetections> images(1);
      int rest = code;
      for (int k = 0; k < n; ++k) {
        const int v = rest % 8;
        rest /= 8;
        BoundingBox b = pool[static_cast<std::size_t>(v % 4)];
        if (v < 4) {
          images[0].ground_truth.push_back(b);
        } else {
          b.score = 1.0 - 0.1 * k;
          images[0].predictions.push_back(b);
        }
      }
      for (double thr : {0.5, 0.75}) {
        const double got = average_precision(images, thr), want = oracle::average_precision(images, thr);
        c.expect(std::abs(got - want) <= 1e-12, "AP mismatch on fixture " + std::to_string(code) + "/" +
                                                    std::to_string(n));
      }
      ++instances;
    }
  }
  c.expect(instances == 8 + 64 + 512 + 4096 + 32768, "fixture count");

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> level(0, 9);
  for (int t = 0; t < 500; ++t) {
    const int rows = 2 + t % 7, cols = 2 + (t / 7) % 7;
    Heatmap m({rows, cols}), labels({rows, cols});
    for (auto& v : m.values()) v = level(rng) / 9.0;
    for (auto& v : labels.values()) v = level(rng) < 3 ? 1.0 : 0.0;
    labels[0] = 1.0, labels[1] = 0.0;
    c.expect(std::abs(gaze_auc(m, labels) - oracle::auc(m, labels)) <= 1e-12, "AUC vs pair counting");
  }

  for (int t = 0; t < 200; ++t) {
    std::vector<BoundingBox> boxes;
    for (int k = 0; k < 25; ++k) {
      auto b = random_box(rng, 60);
      b.category_id = k % 3;
      b.score = (k + 1) / 26.0;
      boxes.push_back(b);
    }
    const auto ref = nms(boxes, 0.3, 100);
    std::shuffle(boxes.begin(), boxes.end(), rng);
    c.expect(nms(boxes, 0.3, 100) == ref, "NMS depends on input order");
  }
}

// ---- 9 --------------------------------------------------------------------

constexpr int kSmokeSamples = 16;
constexpr int kSmokeSteps = 1600;

double window_mean(const std::vector<StepLosses>& h, std::size_t centre, std::size_t half) {
  const std::size_t lo = centre > half ? centre - half : 0, hi = std::min(h.size(), centre + half + 1);
  double s = 0;
  for (std::size_t k = lo; k < hi; ++k) s += h[k].total;
  return s / static_cast<double>(hi - lo);
}

void smoke_train(Check& c, std::ostream& info) {
  const auto t0 = Clock::now();
  std::vector<Sample> samples;
  for (int k = 0; k < kSmokeSamples; ++k) samples.push_back(generate_sample(SceneSpec{}, static_cast<std::size_t>(k)));
  RunConfig cfg;
  cfg.optimizer.batch_size = 4;
  cfg.optimizer.lr = 2e-3;
  cfg.optimizer.max_steps = kSmokeSteps;
  cfg.loss.weights = {1.0, 100.0, 0.001};
  cfg.model.finalize();
  Trainer trainer(cfg, samples);
  trainer.run(nullptr);
  const auto& h = trainer.history();
  const double early = window_mean(h, 50, 25), late = window_mean(h, h.size() - 1, 50);
  const EvalResult r = evaluate(trainer.model(), samples, cfg.loss);
  const double secs = seconds_since(t0);
  info << "steps=" << h.size() << " loss@50=" << early << " loss@end=" << late << " auc=" << r.report.auc
       << " gaze_object_acc=" << r.gaze_object_accuracy << " wuoc_pred=" << r.report.wuoc_mean
       << " wuoc_gt_gaze=" << r.wuoc_gt_gaze << " ap50=" << r.report.ap50 << " time=" << secs << "s";
  c.expect(static_cast<int>(h.size()) <= 2000, "too many steps");
  c.expect(late < early, "smoothed loss did not decrease");
  c.expect(r.report.auc >= 0.85, "training AUC " + std::to_string(r.report.auc));
  c.expect(r.gaze_object_accuracy >= 0.75, "gaze object accuracy " + std::to_string(r.gaze_object_accuracy));
  c.expect(r.wuoc_gt_gaze >= r.report.wuoc_mean, "GT-gaze wUoC below predicted-gaze wUoC");
  c.expect(secs <= 900.0, "took " + std::to_string(secs) + " s");
}

// ---- 10 -------------------------------------------------------------------

void oracle_upper_bound(Check& c) {
  std::vector<Sample> samples;
  for (std::size_t k = 0; k < 32; ++k) samples.push_back(generate_sample(SceneSpec{}, k));
  const GazeLossConfig loss;
  const auto r = evaluate_outputs(samples, oracle_outputs(samples, loss), loss);
  c.expect(r.report.wuoc_mean == 1.0, "wUoC " + std::to_string(r.report.wuoc_mean));
  c.expect(r.report.ap50 == 1.0, "AP50 " + std::to_string(r.report.ap50));
  c.expect(r.report.auc == 1.0, "AUC " + std::to_string(r.report.auc));

  // GT boxes with an uninformative heatmap score below GT heatmap with GT boxes
  auto flat = oracle_outputs(samples, loss);
  for (auto& o : flat) o.heatmap = Heatmap(o.heatmap.shape(), 1.0);
  const auto rb = evaluate_outputs(samples, flat, loss);
  c.expect(rb.report.wuoc_mean < r.report.wuoc_mean, "GT-heatmap row does not dominate");
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments: criterion numbers to run, e.g. "1 2 10"
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&, std::ostream&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "defocus correctness", [](Check& c, std::ostream&) { defocus_correctness(c); }},
      {2, "wUoC oracle equivalence", [](Check& c, std::ostream&) { wuoc_oracle(c); }},
      {3, "energy aggregation loss", [](Check& c, std::ostream&) { energy_loss(c); }},
      {4, "CIoU", [](Check& c, std::ostream&) { ciou(c); }},
      {5, "Gaussian GT heatmap", [](Check& c, std::ostream&) { gaussian_heatmap(c); }},
      {6, "SGS structure", [](Check& c, std::ostream&) { sgs_structure(c); }},
      {7, "cost direction", [](Check& c, std::ostream&) { cost_direction(c); }},
      {8, "metric oracles", [](Check& c, std::ostream&) { metric_oracles(c); }},
      {9, "overfit smoke train", smoke_train},
      {10, "oracle upper bound", [](Check& c, std::ostream&) { oracle_upper_bound(c); }},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    Check c;
    std::ostringstream info;
    const auto t0 = Clock::now();
    try {
      cr.run(c, info);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.ok() ? "PASS" : "FAIL") << "  criterion " << cr.id << " (" << cr.name << "): " << c.count()
              << " checks, " << c.failed() << " failed, " << std::fixed << std::setprecision(1) << seconds_since(t0)
              << " s";
    if (!info.str().empty()) std::cout << " [" << info.str() << "]";
    std::cout << std::endl;
    for (const auto& f : c.failures()) std::cout << "      " << f << '\n';
    failed += !c.ok();
  }
  return failed == 0 ? 0 : 1;
}
