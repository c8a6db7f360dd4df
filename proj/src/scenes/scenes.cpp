#include "gatector/scenes/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

namespace gatector {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::kConfig, "scene spec: " + m); };
  if (image_size < 96) bad("image_size must be >= 96");
  if (grid < 1) bad("grid must be >= 1");
  if (num_categories < 1) bad("num_categories must be >= 1");
  if (!(jitter >= 0.0 && jitter <= 1.0)) bad("jitter must lie in [0,1]");
  if (head_strip < 40 || head_strip >= shelf_x0()) bad("head strip overlaps the shelf region");
  const double cw = static_cast<double>(image_size - shelf_x0() - shelf_margin()) / grid;
  const double ch = static_cast<double>(image_size - 2 * shelf_margin()) / grid;
  if (cw < 12 || ch < 12) bad("grid too dense: products would be smaller than 8 px");
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"image_size", s.image_size}, {"grid", s.grid},         {"num_categories", s.num_categories},
       {"jitter", s.jitter},         {"seed", s.seed},         {"head_strip", s.head_strip}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.image_size = j.value("image_size", s.image_size);
  s.grid = j.value("grid", s.grid);
  s.num_categories = j.value("num_categories", s.num_categories);
  s.jitter = j.value("jitter", s.jitter);
  s.seed = j.value("seed", s.seed);
  s.head_strip = j.value("head_strip", s.head_strip);
}

Point2 Sample::head_center() const {
  const auto c = head_box().center();
  return {c.x / scene.width(), c.y / scene.height()};
}

Tensor head_mask(const BoundingBox& head_box, int image_size) {
  Tensor m({1, image_size, image_size});
  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x)
      if (contains(head_box, {x + 0.5, y + 0.5})) m.at(0, y, x) = 1.0f;
  return m;
}

Rgb category_color(int category, int num_categories) {
  // HSV with s = 0.8, v = 0.85
  const double h = 6.0 * category / num_categories;
  const double v = 0.85, s = 0.8;
  const double c = v * s, x = c * (1 - std::abs(std::fmod(h, 2.0) - 1)), m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto q = [m](double u) { return static_cast<std::uint8_t>(std::lround(255 * (u + m))); };
  return {q(r), q(g), q(b)};
}

std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

Image make_head_crop(const Image& scene, const BoundingBox& head_box) {
  return crop_resize(scene, head_box, scene.width(), scene.height());
}

namespace {

Rgb shade(Rgb c, double f) {
  auto s = [f](std::uint8_t u) { return static_cast<std::uint8_t>(std::clamp(std::lround(u * f), 0L, 255L)); };
  return {s(c.r), s(c.g), s(c.b)};
}

void draw_product(Image& img, int x1, int y1, int x2, int y2, int category, int num_categories) {
  const Rgb base = category_color(category, num_categories);
  const Rgb dark = shade(base, 0.55);
  img.fill_rect(x1, y1, x2, y2, base);
  switch (category % 3) {
    case 1:
      for (int y = y1 + 2; y < y2 - 1; y += 4) img.fill_rect(x1 + 1, y, x2 - 1, y + 2, dark);
      break;
    case 2:
      for (int x = x1 + 2; x < x2 - 1; x += 4) img.fill_rect(x, y1 + 1, x + 2, y2 - 1, dark);
      break;
    default:
      img.fill_rect(x1 + 2, y1 + 2, x2 - 2, y1 + 5, dark);
      break;
  }
  img.draw_box(make_box(x1, y1, x2, y2), 1, shade(base, 0.35));
}

}  // namespace

Sample generate_sample(const SceneSpec& spec, std::size_t index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const int S = spec.image_size;
  Sample s;
  s.scene = Image(S, S, 3);
  s.record.image_id = sample_id(index);

  // background: warm shelf with faint per-pixel noise
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const int n = uniform_int(-6, 6);
      s.scene.set(x, y, {static_cast<std::uint8_t>(196 + n), static_cast<std::uint8_t>(186 + n),
                         static_cast<std::uint8_t>(166 + n)});
    }
  s.scene.fill_rect(0, 0, spec.head_strip, S, {120, 130, 150});

  const int x0 = spec.shelf_x0(), y0 = spec.shelf_margin();
  const double cw = static_cast<double>(S - x0 - spec.shelf_margin()) / spec.grid;
  const double ch = static_cast<double>(S - 2 * spec.shelf_margin()) / spec.grid;
  for (int r = 0; r < spec.grid; ++r) {
    const int cy0 = y0 + static_cast<int>(std::floor(r * ch)), cy1 = y0 + static_cast<int>(std::floor((r + 1) * ch));
    for (int c = 0; c < spec.grid; ++c) {
      const int cx0 = x0 + static_cast<int>(std::floor(c * cw)), cx1 = x0 + static_cast<int>(std::floor((c + 1) * cw));
      // 3 px minimum gap between neighbours
      const int max_w = cx1 - cx0 - 4, max_h = cy1 - cy0 - 4;
      const int w = uniform_int(std::max(8, static_cast<int>(std::lround(0.56 * cw))), max_w);
      const int h = uniform_int(std::max(8, static_cast<int>(std::lround(0.57 * ch))), max_h);
      const int lo_x = cx0 + 2, hi_x = cx1 - 1 - w, lo_y = cy0 + 2, hi_y = cy1 - 1 - h;
      const double mid_x = 0.5 * (lo_x + hi_x), mid_y = 0.5 * (lo_y + hi_y);
      const int bx = std::clamp(static_cast<int>(std::lround(mid_x + spec.jitter * uniform(-0.5, 0.5) * (hi_x - lo_x))), lo_x, hi_x);
      const int by = std::clamp(static_cast<int>(std::lround(mid_y + spec.jitter * uniform(-0.5, 0.5) * (hi_y - lo_y))), lo_y, hi_y);
      const int category = uniform_int(0, spec.num_categories - 1);
      draw_product(s.scene, bx, by, bx + w, by + h, category, spec.num_categories);
      s.record.boxes.push_back(make_box(bx, by, bx + w, by + h, category));
    }
  }

  s.record.gaze_box_index = uniform_int(0, static_cast<int>(s.record.boxes.size()) - 1);
  const auto target = s.gaze_box().center();
  s.record.gaze_point = {target.x / S, target.y / S};

  const double hx = 0.5 * spec.head_strip, hy = uniform(24.0, S - 24.0);
  const double radius = 11.0;
  s.scene.fill_circle(hx, hy, radius, {232, 192, 152});
  const double dx = target.x - hx, dy = target.y - hy, len = std::hypot(dx, dy);
  const double ux = dx / len, uy = dy / len;
  // hair on the far side, eye line towards the target
  s.scene.fill_circle(hx - 5 * ux, hy - 5 * uy, 7.0, {70, 45, 30});
  s.scene.draw_line(hx, hy, hx + 16 * ux, hy + 16 * uy, 3.0, {30, 25, 25});
  s.scene.fill_circle(hx + 7 * ux - 3 * uy, hy + 7 * uy + 3 * ux, 1.6, {250, 250, 250});
  s.scene.fill_circle(hx + 7 * ux + 3 * uy, hy + 7 * uy - 3 * ux, 1.6, {250, 250, 250});
  s.record.head_box = make_box(hx - 18, hy - 18, hx + 18, hy + 18);

  s.head = make_head_crop(s.scene, *s.record.head_box);
  return s;
}

void write_dataset(const SceneSpec& spec, std::size_t n, const fs::path& dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "heads", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create dataset directory '" + dir.string() + "': " + ec.message());
  std::vector<ImageRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s = generate_sample(spec, i);
    write_png(dir / "images" / (s.record.image_id + ".png"), s.scene);
    write_png(dir / "heads" / (s.record.image_id + ".png"), s.head);
    records[i] = std::move(s.record);
  }
  write_records(dir / "annotations.jsonl", records);
  const auto tmp = dir / "spec.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) fail(ErrorKind::kIo, "cannot write '" + tmp.string() + "'");
    out << nlohmann::json(spec).dump(2) << '\n';
  }
  fs::rename(tmp, dir / "spec.json", ec);
  if (ec) fail(ErrorKind::kIo, "cannot move spec.json into place: " + ec.message());
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kData, "dataset directory '" + dir.string() + "' does not exist");
  Dataset ds;
  ds.root = dir;
  if (fs::exists(dir / "spec.json")) {
    std::ifstream in(dir / "spec.json");
    try {
      ds.spec = nlohmann::json::parse(in).get<SceneSpec>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kData, "malformed spec.json in '" + dir.string() + "': " + e.what());
    }
  }
  if (!fs::exists(dir / "annotations.jsonl")) {
    std::cerr << "warning: no annotations.jsonl in '" << dir.string() << "', dataset is empty\n";
    return ds;
  }
  for (auto& rec : read_records(dir / "annotations.jsonl")) {
    Sample s;
    s.scene = read_png(dir / "images" / (rec.image_id + ".png"));
    if (!rec.head_box) fail(ErrorKind::kData, "record '" + rec.image_id + "' has no head_box");
    s.head = read_png(dir / "heads" / (rec.image_id + ".png"));
    s.record = std::move(rec);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) std::cerr << "warning: dataset '" << dir.string() << "' contains no samples\n";
  return ds;
}

}  // namespace gatector
