#include <cmath>
#include <cstring>
#include <limits>

#include "gatector/kernels/kernels.hpp"

namespace gatector::kernels::parallel {

namespace {

struct PatchGeometry {
  int channels, height, width;  // image side
  int kernel, stride, pad;
  int out_h, out_w;             // column side
};

// col: (channels * k * k, out_h * out_w)
void im2col(const float* im, const PatchGeometry& g, float* col) {
  const int kk = g.kernel * g.kernel;
  const int rows = g.channels * kk;
  const std::size_t cols = static_cast<std::size_t>(g.out_h) * g.out_w;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / kk, kh = (r % kk) / g.kernel, kw = r % g.kernel;
    const float* plane = im + static_cast<std::size_t>(c) * g.height * g.width;
    float* dst = col + r * cols;
    for (int i = 0; i < g.out_h; ++i) {
      const int ih = i * g.stride - g.pad + kh;
      float* row = dst + static_cast<std::size_t>(i) * g.out_w;
      if (ih < 0 || ih >= g.height) {
        std::memset(row, 0, sizeof(float) * g.out_w);
        continue;
      }
      const float* src = plane + static_cast<std::size_t>(ih) * g.width;
      for (int j = 0; j < g.out_w; ++j) {
        const int iw = j * g.stride - g.pad + kw;
        row[j] = (iw >= 0 && iw < g.width) ? src[iw] : 0.0f;
      }
    }
  }
}

// Scatter-add of columns back into the image; each thread owns whole channels.
void col2im(const float* col, const PatchGeometry& g, float* im) {
  const int kk = g.kernel * g.kernel;
  const std::size_t cols = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t plane_size = static_cast<std::size_t>(g.height) * g.width;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    float* plane = im + c * plane_size;
    std::memset(plane, 0, sizeof(float) * plane_size);
    for (int q = 0; q < kk; ++q) {
      const int kh = q / g.kernel, kw = q % g.kernel;
      const float* src = col + (static_cast<std::size_t>(c) * kk + q) * cols;
      for (int i = 0; i < g.out_h; ++i) {
        const int ih = i * g.stride - g.pad + kh;
        if (ih < 0 || ih >= g.height) continue;
        float* dst = plane + static_cast<std::size_t>(ih) * g.width;
        const float* row = src + static_cast<std::size_t>(i) * g.out_w;
        for (int j = 0; j < g.out_w; ++j) {
          const int iw = j * g.stride - g.pad + kw;
          if (iw >= 0 && iw < g.width) dst[iw] += row[j];
        }
      }
    }
  }
}

bool is_pointwise(int kernel, ConvGeometry g) { return kernel == 1 && g.stride == 1 && g.pad == 0; }

void add_channel_bias(float* y, const Tensor& bias, int channels, std::size_t plane) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const float b = bias[c];
    float* p = y + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

void reduce_channel_sum(const Tensor& grad_out, Tensor* out) {
  const auto d = Dims4::of(grad_out.shape());
  *out = Tensor({d.c});
#pragma omp parallel for schedule(static)
  for (int c = 0; c < d.c; ++c) {
    double s = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const float* p = grad_out.data() + (static_cast<std::size_t>(n) * d.c + c) * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) s += p[i];
    }
    (*out)[c] = static_cast<float>(s);
  }
}

struct Lerp {
  int i0, i1;
  float w1;
};

std::vector<Lerp> source_coords(int in, int out) {
  std::vector<Lerp> v(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    const double src = std::max((d + 0.5) * scale - 0.5, 0.0);
    const int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    v[d] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - i0)};
  }
  return v;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const auto in = Dims4::of(x.shape());
  const int cout = weight.dim(0), k = weight.dim(2);
  require(weight.dim(1) == in.c, "conv2d: weight input channels mismatch");
  const int oh = conv_out_size(in.h, k, g.stride, g.pad), ow = conv_out_size(in.w, k, g.stride, g.pad);
  require(oh >= 1 && ow >= 1, "conv2d: input smaller than kernel");
  Tensor y({in.n, cout, oh, ow});
  const PatchGeometry pg{in.c, in.h, in.w, k, g.stride, g.pad, oh, ow};
  const int kdim = in.c * k * k;
  const int cols = oh * ow;
  std::vector<float> col;
  if (!is_pointwise(k, g)) col.resize(static_cast<std::size_t>(kdim) * cols);
  for (int n = 0; n < in.n; ++n) {
    const float* xin = x.data() + n * in.image();
    const float* b = xin;
    if (!col.empty()) {
      im2col(xin, pg, col.data());
      b = col.data();
    }
    float* yn = y.data() + static_cast<std::size_t>(n) * cout * cols;
    gemm(false, false, cout, cols, kdim, 1.0f, weight.data(), b, 0.0f, yn);
    if (bias) add_channel_bias(yn, *bias, cout, static_cast<std::size_t>(cols));
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g, Tensor* grad_x,
                     Tensor* grad_w, Tensor* grad_b) {
  const auto in = Dims4::of(x.shape());
  const auto out = Dims4::of(grad_out.shape());
  const int k = weight.dim(2);
  const PatchGeometry pg{in.c, in.h, in.w, k, g.stride, g.pad, out.h, out.w};
  const int kdim = in.c * k * k;
  const int cols = out.h * out.w;
  const bool pointwise = is_pointwise(k, g);
  std::vector<float> col(pointwise ? 0 : static_cast<std::size_t>(kdim) * cols);
  std::vector<float> gcol(pointwise ? 0 : static_cast<std::size_t>(kdim) * cols);
  if (grad_w) *grad_w = Tensor(weight.shape());
  if (grad_x) *grad_x = Tensor(x.shape());
  for (int n = 0; n < in.n; ++n) {
    const float* xin = x.data() + n * in.image();
    const float* gy = grad_out.data() + n * out.image();
    if (grad_w) {
      const float* b = xin;
      if (!pointwise) {
        im2col(xin, pg, col.data());
        b = col.data();
      }
      gemm(false, true, out.c, kdim, cols, 1.0f, gy, b, 1.0f, grad_w->data());
    }
    if (grad_x) {
      float* gx = grad_x->data() + n * in.image();
      if (pointwise) {
        gemm(true, false, kdim, cols, out.c, 1.0f, weight.data(), gy, 0.0f, gx);
      } else {
        gemm(true, false, kdim, cols, out.c, 1.0f, weight.data(), gy, 0.0f, gcol.data());
        col2im(gcol.data(), pg, gx);
      }
    }
  }
  if (grad_b) reduce_channel_sum(grad_out, grad_b);
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const auto in = Dims4::of(x.shape());
  require(weight.dim(0) == in.c, "conv_transpose2d: weight input channels mismatch");
  const int cout = weight.dim(1), k = weight.dim(2);
  const int oh = deconv_out_size(in.h, k, g.stride, g.pad), ow = deconv_out_size(in.w, k, g.stride, g.pad);
  Tensor y({in.n, cout, oh, ow});
  const PatchGeometry pg{cout, oh, ow, k, g.stride, g.pad, in.h, in.w};
  const int rows = cout * k * k;
  const int cols = in.h * in.w;
  std::vector<float> col(static_cast<std::size_t>(rows) * cols);
  const std::size_t out_image = static_cast<std::size_t>(cout) * oh * ow;
  for (int n = 0; n < in.n; ++n) {
    gemm(true, false, rows, cols, in.c, 1.0f, weight.data(), x.data() + n * in.image(), 0.0f, col.data());
    float* yn = y.data() + n * out_image;
    col2im(col.data(), pg, yn);
    if (bias) add_channel_bias(yn, *bias, cout, static_cast<std::size_t>(oh) * ow);
  }
  return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g,
                               Tensor* grad_x, Tensor* grad_w, Tensor* grad_b) {
  const auto in = Dims4::of(x.shape());
  const auto out = Dims4::of(grad_out.shape());
  const int k = weight.dim(2);
  const PatchGeometry pg{out.c, out.h, out.w, k, g.stride, g.pad, in.h, in.w};
  const int rows = out.c * k * k;
  const int cols = in.h * in.w;
  std::vector<float> gcol(static_cast<std::size_t>(rows) * cols);
  if (grad_w) *grad_w = Tensor(weight.shape());
  if (grad_x) *grad_x = Tensor(x.shape());
  for (int n = 0; n < in.n; ++n) {
    im2col(grad_out.data() + n * out.image(), pg, gcol.data());
    const float* xin = x.data() + n * in.image();
    if (grad_w) gemm(false, true, in.c, rows, cols, 1.0f, xin, gcol.data(), 1.0f, grad_w->data());
    if (grad_x)
      gemm(false, false, in.c, cols, rows, 1.0f, weight.data(), gcol.data(), 0.0f, grad_x->data() + n * in.image());
  }
  if (grad_b) reduce_channel_sum(grad_out, grad_b);
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, float eps,
                  GroupNormCache* cache) {
  const auto d = Dims4::of(x.shape());
  require(groups >= 1 && d.c % groups == 0, "group_norm: channels not divisible by groups");
  const int cpg = d.c / groups;
  const std::size_t count = static_cast<std::size_t>(cpg) * d.plane();
  Tensor y(x.shape());
  GroupNormCache local;
  local.mean.resize(static_cast<std::size_t>(d.n) * groups);
  local.rstd.resize(local.mean.size());
#pragma omp parallel for schedule(static)
  for (int ng = 0; ng < d.n * groups; ++ng) {
    const int n = ng / groups, gi = ng % groups;
    const std::size_t base = (static_cast<std::size_t>(n) * d.c + gi * cpg) * d.plane();
    const float* xp = x.data() + base;
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) sum += xp[i];
    const double mean = sum / count;
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (xp[i] - mean) * (xp[i] - mean);
    var /= count;
    const float m = static_cast<float>(mean);
    const float rstd = static_cast<float>(1.0 / std::sqrt(var + eps));
    local.mean[ng] = m;
    local.rstd[ng] = rstd;
    float* yp = y.data() + base;
    for (int c = 0; c < cpg; ++c) {
      const float scale = rstd * gamma[gi * cpg + c];
      const float shift = beta[gi * cpg + c] - m * scale;
      const std::size_t off = c * d.plane();
      for (std::size_t p = 0; p < d.plane(); ++p) yp[off + p] = xp[off + p] * scale + shift;
    }
  }
  if (cache) *cache = std::move(local);
  return y;
}

void group_norm_backward(const Tensor& x, const Tensor& gamma, const Tensor& grad_out, int groups,
                         const GroupNormCache& cache, Tensor* grad_x, Tensor* grad_gamma, Tensor* grad_beta) {
  const auto d = Dims4::of(x.shape());
  const int cpg = d.c / groups;
  const std::size_t count = static_cast<std::size_t>(cpg) * d.plane();
  // Per-(n, channel) partial sums keep the gamma/beta reduction order fixed.
  std::vector<double> part_g(static_cast<std::size_t>(d.n) * d.c), part_b(part_g.size());
  if (grad_x) *grad_x = Tensor(x.shape());
#pragma omp parallel for schedule(static)
  for (int ng = 0; ng < d.n * groups; ++ng) {
    const int n = ng / groups, gi = ng % groups;
    const std::size_t base = (static_cast<std::size_t>(n) * d.c + gi * cpg) * d.plane();
    const float mean = cache.mean[ng], rstd = cache.rstd[ng];
    const float* xp = x.data() + base;
    const float* gp = grad_out.data() + base;
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int c = 0; c < cpg; ++c) {
      const int ch = gi * cpg + c;
      double sg = 0.0, sb = 0.0;
      const std::size_t off = c * d.plane();
      for (std::size_t p = 0; p < d.plane(); ++p) {
        const double xhat = (xp[off + p] - mean) * rstd;
        sg += gp[off + p] * xhat;
        sb += gp[off + p];
      }
      part_g[static_cast<std::size_t>(n) * d.c + ch] = sg;
      part_b[static_cast<std::size_t>(n) * d.c + ch] = sb;
      sum_dxhat += sb * gamma[ch];
      sum_dxhat_xhat += sg * gamma[ch];
    }
    if (grad_x) {
      const float m1 = static_cast<float>(sum_dxhat / count), m2 = static_cast<float>(sum_dxhat_xhat / count);
      float* gx = grad_x->data() + base;
      for (int c = 0; c < cpg; ++c) {
        const float gm = gamma[gi * cpg + c];
        const std::size_t off = c * d.plane();
        for (std::size_t p = 0; p < d.plane(); ++p) {
          const float xhat = (xp[off + p] - mean) * rstd;
          gx[off + p] = rstd * (gp[off + p] * gm - m1 - xhat * m2);
        }
      }
    }
  }
  if (grad_gamma || grad_beta) {
    Tensor gg(gamma.shape()), gb(gamma.shape());
    for (int c = 0; c < d.c; ++c) {
      double sg = 0.0, sb = 0.0;
      for (int n = 0; n < d.n; ++n) {
        sg += part_g[static_cast<std::size_t>(n) * d.c + c];
        sb += part_b[static_cast<std::size_t>(n) * d.c + c];
      }
      gg[c] = static_cast<float>(sg);
      gb[c] = static_cast<float>(sb);
    }
    if (grad_gamma) *grad_gamma = std::move(gg);
    if (grad_beta) *grad_beta = std::move(gb);
  }
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const auto d = Dims4::of(x.shape());
  Tensor y({d.n, d.c, out_h, out_w});
  const auto ys = source_coords(d.h, out_h);
  const auto xs = source_coords(d.w, out_w);
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const float* src = x.data() + nc * d.plane();
    float* dst = y.data() + nc * out_plane;
    for (int i = 0; i < out_h; ++i) {
      const Lerp& ly = ys[i];
      const float* r0 = src + static_cast<std::size_t>(ly.i0) * d.w;
      const float* r1 = src + static_cast<std::size_t>(ly.i1) * d.w;
      for (int j = 0; j < out_w; ++j) {
        const Lerp& lx = xs[j];
        const float top = r0[lx.i0] * (1 - lx.w1) + r0[lx.i1] * lx.w1;
        const float bot = r1[lx.i0] * (1 - lx.w1) + r1[lx.i1] * lx.w1;
        dst[static_cast<std::size_t>(i) * out_w + j] = top * (1 - ly.w1) + bot * ly.w1;
      }
    }
  }
  return y;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, int in_h, int in_w) {
  const auto d = Dims4::of(grad_out.shape());
  Tensor gx({d.n, d.c, in_h, in_w});
  const auto ys = source_coords(in_h, d.h);
  const auto xs = source_coords(in_w, d.w);
  const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const float* go = grad_out.data() + nc * d.plane();
    float* dst = gx.data() + nc * in_plane;
    for (int i = 0; i < d.h; ++i) {
      const Lerp& ly = ys[i];
      float* r0 = dst + static_cast<std::size_t>(ly.i0) * in_w;
      float* r1 = dst + static_cast<std::size_t>(ly.i1) * in_w;
      for (int j = 0; j < d.w; ++j) {
        const Lerp& lx = xs[j];
        const float g = go[static_cast<std::size_t>(i) * d.w + j];
        r0[lx.i0] += g * (1 - ly.w1) * (1 - lx.w1);
        r0[lx.i1] += g * (1 - ly.w1) * lx.w1;
        r1[lx.i0] += g * ly.w1 * (1 - lx.w1);
        r1[lx.i1] += g * ly.w1 * lx.w1;
      }
    }
  }
  return gx;
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride, std::vector<int>* argmax) {
  const auto d = Dims4::of(x.shape());
  const int oh = conv_out_size(d.h, kernel, stride, 0), ow = conv_out_size(d.w, kernel, stride, 0);
  Tensor y({d.n, d.c, oh, ow});
  std::vector<int> local(y.size());
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const float* src = x.data() + nc * d.plane();
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        float best = -std::numeric_limits<float>::infinity();
        int best_idx = 0;
        for (int kh = 0; kh < kernel; ++kh)
          for (int kw = 0; kw < kernel; ++kw) {
            const int idx = (i * stride + kh) * d.w + j * stride + kw;
            if (src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
        const std::size_t o = nc * out_plane + static_cast<std::size_t>(i) * ow + j;
        y[o] = best;
        local[o] = best_idx;
      }
  }
  if (argmax) *argmax = std::move(local);
  return y;
}

Tensor max_pool2d_backward(const Tensor& grad_out, const std::vector<int>& argmax, const Shape& in_shape) {
  const auto d = Dims4::of(in_shape);
  const auto od = Dims4::of(grad_out.shape());
  Tensor gx(in_shape);
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < od.n * od.c; ++nc)
    for (std::size_t p = 0; p < od.plane(); ++p) {
      const std::size_t o = nc * od.plane() + p;
      gx[nc * d.plane() + argmax[o]] += grad_out[o];
    }
  return gx;
}

}  // namespace gatector::kernels::parallel
