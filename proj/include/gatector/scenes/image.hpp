#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gatector/geometry/box.hpp"
#include "gatector/tensor/tensor.hpp"

namespace gatector {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  ImageSize size() const { return {width_, height_}; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t& at(int x, int y, int c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::vector<std::uint8_t>& pixels() { return pixels_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  void set(int x, int y, Rgb c);
  void fill_rect(int x1, int y1, int x2, int y2, Rgb c);  // half-open [x1,x2) x [y1,y2)
  void fill_circle(double cx, double cy, double radius, Rgb c);
  void draw_line(double x0, double y0, double x1, double y1, double thickness, Rgb c);
  void draw_box(const BoundingBox& b, int thickness, Rgb c);
  void blit(const Image& src, int x0, int y0);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0, height_ = 0, channels_ = 3;
  std::vector<std::uint8_t> pixels_;
};

/// Bilinear crop of [x1,x2) x [y1,y2) (may extend past the border; clamped) to out_w x out_h.
Image crop_resize(const Image& src, const BoundingBox& region, int out_w, int out_h);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Min-max scaled 8-bit gray rendering of a 2-D map.
Image heatmap_to_image(const TensorD& m);

/// (3,H,W) float tensor, (v/255 - 0.5) / 0.25.
Tensor image_to_tensor(const Image& image);

}  // namespace gatector
