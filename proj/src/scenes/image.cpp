#include "gatector/scenes/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace gatector {

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  require(width > 0 && height > 0, "image dimensions must be positive");
  require(channels == 1 || channels == 3, "image must have 1 or 3 channels");
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  if (channels_ == 1) {
    at(x, y, 0) = static_cast<std::uint8_t>((c.r * 77 + c.g * 150 + c.b * 29) >> 8);
    return;
  }
  at(x, y, 0) = c.r;
  at(x, y, 1) = c.g;
  at(x, y, 2) = c.b;
}

void Image::fill_rect(int x1, int y1, int x2, int y2, Rgb c) {
  for (int y = std::max(y1, 0); y < std::min(y2, height_); ++y)
    for (int x = std::max(x1, 0); x < std::min(x2, width_); ++x) set(x, y, c);
}

void Image::fill_circle(double cx, double cy, double radius, Rgb c) {
  const int x0 = static_cast<int>(std::floor(cx - radius)), x1 = static_cast<int>(std::ceil(cx + radius));
  const int y0 = static_cast<int>(std::floor(cy - radius)), y1 = static_cast<int>(std::ceil(cy + radius));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= radius * radius) set(x, y, c);
    }
}

void Image::draw_line(double x0, double y0, double x1, double y1, double thickness, Rgb c) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    fill_circle(x0 + t * (x1 - x0), y0 + t * (y1 - y0), thickness / 2, c);
  }
}

void Image::draw_box(const BoundingBox& b, int thickness, Rgb c) {
  const int x1 = static_cast<int>(std::lround(b.x1)), y1 = static_cast<int>(std::lround(b.y1));
  const int x2 = static_cast<int>(std::lround(b.x2)), y2 = static_cast<int>(std::lround(b.y2));
  fill_rect(x1, y1, x2, y1 + thickness, c);
  fill_rect(x1, y2 - thickness, x2, y2, c);
  fill_rect(x1, y1, x1 + thickness, y2, c);
  fill_rect(x2 - thickness, y1, x2, y2, c);
}

void Image::blit(const Image& src, int x0, int y0) {
  require(src.channels() == channels_, "blit: channel mismatch");
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      const int tx = x0 + x, ty = y0 + y;
      if (tx < 0 || ty < 0 || tx >= width_ || ty >= height_) continue;
      for (int c = 0; c < channels_; ++c) at(tx, ty, c) = src.at(x, y, c);
    }
}

Image crop_resize(const Image& src, const BoundingBox& region, int out_w, int out_h) {
  Image out(out_w, out_h, src.channels());
  const double sx = region.width() / out_w, sy = region.height() / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp(region.y1 + (y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp(region.x1 + (x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double v = (1 - wy) * ((1 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c)) +
                         wy * ((1 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  require(!image.empty(), "write_png: empty image");
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    File f(std::fopen(tmp.c_str(), "wb"));
    if (!f) fail(ErrorKind::kIo, "cannot open '" + tmp.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      fail(ErrorKind::kIo, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      fail(ErrorKind::kIo, "failed writing PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8,
                 image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width()) * image.channels();
    for (int y = 0; y < image.height(); ++y)
      png_write_row(png, const_cast<png_bytep>(image.pixels().data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot move PNG into place at '" + path.string() + "': " + ec.message());
}

Image read_png(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorKind::kData, "missing image file '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "libpng initialisation failed");
  }
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kData, "corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  image = Image(w, h, channels == 1 ? 1 : 3);
  const std::size_t stride = static_cast<std::size_t>(w) * image.channels();
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = image.pixels().data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image heatmap_to_image(const TensorD& m) {
  require(m.rank() == 2, "heatmap_to_image expects a 2-D map");
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  const double range = *hi - *lo;
  Image out(m.dim(1), m.dim(0), 1);
  for (int i = 0; i < m.dim(0); ++i)
    for (int j = 0; j < m.dim(1); ++j) {
      const double v = range > 0 ? (m.at(i, j) - *lo) / range : 0.0;
      out.at(j, i, 0) = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  return out;
}

Tensor image_to_tensor(const Image& image) {
  require(image.channels() == 3, "image_to_tensor expects RGB");
  Tensor t({3, image.height(), image.width()});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x) t.at(c, y, x) = (image.at(x, y, c) / 255.0f - 0.5f) / 0.25f;
  return t;
}

}  // namespace gatector
