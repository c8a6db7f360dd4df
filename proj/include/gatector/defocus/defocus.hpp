#pragma once

// Channel-to-space rearrangement (Defocus) and its inverse (Focus).
//
// Sub-pixel order is block-row-major:
//   defocus(x)[c, r*i + di, r*j + dj] = x[c*r*r + di*r + dj, i, j]
// Both accept CHW or NCHW tensors and are pure permutations.

#include "gatector/tensor/tensor.hpp"

namespace gatector {

namespace detail {

struct PlaneLayout {
  int batch, channels, height, width;
};

inline PlaneLayout layout_of(const Shape& s, const char* op) {
  require(s.size() == 3 || s.size() == 4, std::string(op) + ": expected CHW or NCHW tensor, got " + shape_string(s));
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  return {s[0], s[1], s[2], s[3]};
}

inline Shape with_layout(const Shape& like, int n, int c, int h, int w) {
  if (like.size() == 3) return {c, h, w};
  return {n, c, h, w};
}

}  // namespace detail

template <typename T>
BasicTensor<T> defocus(const BasicTensor<T>& x, int ratio) {
  require(ratio >= 2, "defocus: ratio must be >= 2");
  const auto in = detail::layout_of(x.shape(), "defocus");
  const int rr = ratio * ratio;
  require(in.channels % rr == 0, "defocus: channel count " + std::to_string(in.channels) +
                                     " is not divisible by ratio^2 = " + std::to_string(rr));
  const int oc = in.channels / rr, oh = in.height * ratio, ow = in.width * ratio;
  BasicTensor<T> y(detail::with_layout(x.shape(), in.batch, oc, oh, ow));
  const std::size_t in_plane = static_cast<std::size_t>(in.height) * in.width;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < in.batch * in.channels; ++nc) {
    const int n = nc / in.channels, k = nc % in.channels;
    const int c = k / rr, di = (k % rr) / ratio, dj = k % ratio;
    const T* src = x.data() + static_cast<std::size_t>(nc) * in_plane;
    T* dst = y.data() + (static_cast<std::size_t>(n) * oc + c) * out_plane;
    for (int i = 0; i < in.height; ++i) {
      T* row = dst + static_cast<std::size_t>(ratio * i + di) * ow + dj;
      for (int j = 0; j < in.width; ++j) row[ratio * j] = src[static_cast<std::size_t>(i) * in.width + j];
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> focus(const BasicTensor<T>& y, int ratio) {
  require(ratio >= 2, "focus: ratio must be >= 2");
  const auto in = detail::layout_of(y.shape(), "focus");
  require(in.height % ratio == 0 && in.width % ratio == 0,
          "focus: spatial size " + std::to_string(in.height) + "x" + std::to_string(in.width) +
              " is not divisible by ratio " + std::to_string(ratio));
  const int rr = ratio * ratio;
  const int oc = in.channels * rr, oh = in.height / ratio, ow = in.width / ratio;
  BasicTensor<T> x(detail::with_layout(y.shape(), in.batch, oc, oh, ow));
  const std::size_t in_plane = static_cast<std::size_t>(in.height) * in.width;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
  for (int nk = 0; nk < in.batch * oc; ++nk) {
    const int n = nk / oc, k = nk % oc;
    const int c = k / rr, di = (k % rr) / ratio, dj = k % ratio;
    const T* src = y.data() + (static_cast<std::size_t>(n) * in.channels + c) * in_plane;
    T* dst = x.data() + static_cast<std::size_t>(nk) * out_plane;
    for (int i = 0; i < oh; ++i) {
      const T* row = src + static_cast<std::size_t>(ratio * i + di) * in.width + dj;
      for (int j = 0; j < ow; ++j) dst[static_cast<std::size_t>(i) * ow + j] = row[ratio * j];
    }
  }
  return x;
}

}  // namespace gatector
