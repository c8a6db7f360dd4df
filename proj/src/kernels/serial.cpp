// Reference kernels: direct loops with double accumulation, no im2col.

#include <cmath>
#include <limits>

#include "gatector/kernels/kernels.hpp"

namespace gatector::kernels::serial {

namespace {

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

Tensor to_float(const Shape& shape, const std::vector<double>& v) {
  Tensor t(shape);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

struct Lerp {
  int i0, i1;
  double w1;
};

Lerp source_coord(int dst, int in, int out) {
  double scale = static_cast<double>(in) / out;
  double src = std::max((dst + 0.5) * scale - 0.5, 0.0);
  int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
  int i1 = std::min(i0 + 1, in - 1);
  return {i0, i1, src - i0};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const auto in = Dims4::of(x.shape());
  const int cout = weight.dim(0), k = weight.dim(2);
  require(weight.dim(1) == in.c, "conv2d: weight input channels mismatch");
  const int oh = conv_out_size(in.h, k, g.stride, g.pad), ow = conv_out_size(in.w, k, g.stride, g.pad);
  Tensor y({in.n, cout, oh, ow});
  for (int n = 0; n < in.n; ++n)
    for (int co = 0; co < cout; ++co)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = bias ? (*bias)[co] : 0.0;
          for (int ci = 0; ci < in.c; ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int ih = i * g.stride - g.pad + kh, iw = j * g.stride - g.pad + kw;
                if (ih < 0 || ih >= in.h || iw < 0 || iw >= in.w) continue;
                s += static_cast<double>(x.at(n, ci, ih, iw)) * weight.at(co, ci, kh, kw);
              }
          y.at(n, co, i, j) = static_cast<float>(s);
        }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g, Tensor* grad_x,
                     Tensor* grad_w, Tensor* grad_b) {
  const auto in = Dims4::of(x.shape());
  const auto out = Dims4::of(grad_out.shape());
  const int k = weight.dim(2);
  auto gx = zeros(x.size()), gw = zeros(weight.size()), gb = zeros(static_cast<std::size_t>(out.c));
  for (int n = 0; n < out.n; ++n)
    for (int co = 0; co < out.c; ++co)
      for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) {
          const double go = grad_out.at(n, co, i, j);
          gb[co] += go;
          for (int ci = 0; ci < in.c; ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int ih = i * g.stride - g.pad + kh, iw = j * g.stride - g.pad + kw;
                if (ih < 0 || ih >= in.h || iw < 0 || iw >= in.w) continue;
                const std::size_t xi = ((static_cast<std::size_t>(n) * in.c + ci) * in.h + ih) * in.w + iw;
                const std::size_t wi = ((static_cast<std::size_t>(co) * in.c + ci) * k + kh) * k + kw;
                gx[xi] += go * weight[wi];
                gw[wi] += go * x[xi];
              }
        }
  if (grad_x) *grad_x = to_float(x.shape(), gx);
  if (grad_w) *grad_w = to_float(weight.shape(), gw);
  if (grad_b) *grad_b = to_float({out.c}, gb);
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const auto in = Dims4::of(x.shape());
  require(weight.dim(0) == in.c, "conv_transpose2d: weight input channels mismatch");
  const int cout = weight.dim(1), k = weight.dim(2);
  const int oh = deconv_out_size(in.h, k, g.stride, g.pad), ow = deconv_out_size(in.w, k, g.stride, g.pad);
  const Shape shape{in.n, cout, oh, ow};
  auto y = zeros(shape_size(shape));
  for (int n = 0; n < in.n; ++n)
    for (int co = 0; co < cout; ++co) {
      const std::size_t base = (static_cast<std::size_t>(n) * cout + co) * oh * ow;
      if (bias)
        for (int p = 0; p < oh * ow; ++p) y[base + p] = (*bias)[co];
      for (int ci = 0; ci < in.c; ++ci)
        for (int i = 0; i < in.h; ++i)
          for (int j = 0; j < in.w; ++j)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int o_h = i * g.stride - g.pad + kh, o_w = j * g.stride - g.pad + kw;
                if (o_h < 0 || o_h >= oh || o_w < 0 || o_w >= ow) continue;
                y[base + static_cast<std::size_t>(o_h) * ow + o_w] +=
                    static_cast<double>(x.at(n, ci, i, j)) * weight.at(ci, co, kh, kw);
              }
    }
  return to_float(shape, y);
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g,
                               Tensor* grad_x, Tensor* grad_w, Tensor* grad_b) {
  const auto in = Dims4::of(x.shape());
  const auto out = Dims4::of(grad_out.shape());
  const int k = weight.dim(2);
  auto gx = zeros(x.size()), gw = zeros(weight.size()), gb = zeros(static_cast<std::size_t>(out.c));
  for (int n = 0; n < out.n; ++n)
    for (int co = 0; co < out.c; ++co)
      for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) gb[co] += grad_out.at(n, co, i, j);
  for (int n = 0; n < in.n; ++n)
    for (int ci = 0; ci < in.c; ++ci)
      for (int i = 0; i < in.h; ++i)
        for (int j = 0; j < in.w; ++j) {
          const std::size_t xi = ((static_cast<std::size_t>(n) * in.c + ci) * in.h + i) * in.w + j;
          for (int co = 0; co < out.c; ++co)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                int o_h = i * g.stride - g.pad + kh, o_w = j * g.stride - g.pad + kw;
                if (o_h < 0 || o_h >= out.h || o_w < 0 || o_w >= out.w) continue;
                const double go = grad_out.at(n, co, o_h, o_w);
                const std::size_t wi = ((static_cast<std::size_t>(ci) * out.c + co) * k + kh) * k + kw;
                gx[xi] += go * weight[wi];
                gw[wi] += go * x[xi];
              }
        }
  if (grad_x) *grad_x = to_float(x.shape(), gx);
  if (grad_w) *grad_w = to_float(weight.shape(), gw);
  if (grad_b) *grad_b = to_float({out.c}, gb);
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
  for (int n = 0; n < d.n; ++n)
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t base = (static_cast<std::size_t>(n) * d.c + gi * cpg) * d.plane();
      double mean = 0.0;
      for (std::size_t i = 0; i < count; ++i) mean += x[base + i];
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t i = 0; i < count; ++i) var += (x[base + i] - mean) * (x[base + i] - mean);
      var /= static_cast<double>(count);
      const double rstd = 1.0 / std::sqrt(var + eps);
      local.mean[n * groups + gi] = static_cast<float>(mean);
      local.rstd[n * groups + gi] = static_cast<float>(rstd);
      for (int c = 0; c < cpg; ++c) {
        const int ch = gi * cpg + c;
        for (std::size_t p = 0; p < d.plane(); ++p) {
          const std::size_t idx = base + c * d.plane() + p;
          y[idx] = static_cast<float>((x[idx] - mean) * rstd * gamma[ch] + beta[ch]);
        }
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
  auto gx = zeros(x.size()), gg = zeros(static_cast<std::size_t>(d.c)), gbeta = zeros(static_cast<std::size_t>(d.c));
  for (int n = 0; n < d.n; ++n)
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t base = (static_cast<std::size_t>(n) * d.c + gi * cpg) * d.plane();
      const double mean = cache.mean[n * groups + gi], rstd = cache.rstd[n * groups + gi];
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int c = 0; c < cpg; ++c) {
        const int ch = gi * cpg + c;
        for (std::size_t p = 0; p < d.plane(); ++p) {
          const std::size_t idx = base + c * d.plane() + p;
          const double xhat = (x[idx] - mean) * rstd;
          const double go = grad_out[idx];
          gg[ch] += go * xhat;
          gbeta[ch] += go;
          sum_dxhat += go * gamma[ch];
          sum_dxhat_xhat += go * gamma[ch] * xhat;
        }
      }
      const double m1 = sum_dxhat / count, m2 = sum_dxhat_xhat / count;
      for (int c = 0; c < cpg; ++c) {
        const int ch = gi * cpg + c;
        for (std::size_t p = 0; p < d.plane(); ++p) {
          const std::size_t idx = base + c * d.plane() + p;
          const double xhat = (x[idx] - mean) * rstd;
          gx[idx] = rstd * (grad_out[idx] * gamma[ch] - m1 - xhat * m2);
        }
      }
    }
  if (grad_x) *grad_x = to_float(x.shape(), gx);
  if (grad_gamma) *grad_gamma = to_float(gamma.shape(), gg);
  if (grad_beta) *grad_beta = to_float(gamma.shape(), gbeta);
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const auto d = Dims4::of(x.shape());
  Tensor y({d.n, d.c, out_h, out_w});
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int i = 0; i < out_h; ++i) {
        const Lerp ly = source_coord(i, d.h, out_h);
        for (int j = 0; j < out_w; ++j) {
          const Lerp lx = source_coord(j, d.w, out_w);
          const double top = x.at(n, c, ly.i0, lx.i0) * (1 - lx.w1) + x.at(n, c, ly.i0, lx.i1) * lx.w1;
          const double bot = x.at(n, c, ly.i1, lx.i0) * (1 - lx.w1) + x.at(n, c, ly.i1, lx.i1) * lx.w1;
          y.at(n, c, i, j) = static_cast<float>(top * (1 - ly.w1) + bot * ly.w1);
        }
      }
  return y;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, int in_h, int in_w) {
  const auto d = Dims4::of(grad_out.shape());
  const Shape shape{d.n, d.c, in_h, in_w};
  auto gx = zeros(shape_size(shape));
  auto at = [&](int n, int c, int i, int j) -> double& {
    return gx[((static_cast<std::size_t>(n) * d.c + c) * in_h + i) * in_w + j];
  };
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int i = 0; i < d.h; ++i) {
        const Lerp ly = source_coord(i, in_h, d.h);
        for (int j = 0; j < d.w; ++j) {
          const Lerp lx = source_coord(j, in_w, d.w);
          const double go = grad_out.at(n, c, i, j);
          at(n, c, ly.i0, lx.i0) += go * (1 - ly.w1) * (1 - lx.w1);
          at(n, c, ly.i0, lx.i1) += go * (1 - ly.w1) * lx.w1;
          at(n, c, ly.i1, lx.i0) += go * ly.w1 * (1 - lx.w1);
          at(n, c, ly.i1, lx.i1) += go * ly.w1 * lx.w1;
        }
      }
  return to_float(shape, gx);
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride, std::vector<int>* argmax) {
  const auto d = Dims4::of(x.shape());
  const int oh = conv_out_size(d.h, kernel, stride, 0), ow = conv_out_size(d.w, kernel, stride, 0);
  Tensor y({d.n, d.c, oh, ow});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          int best_idx = 0;
          for (int kh = 0; kh < kernel; ++kh)
            for (int kw = 0; kw < kernel; ++kw) {
              const int ih = i * stride + kh, iw = j * stride + kw;
              const float v = x.at(n, c, ih, iw);
              if (v > best) {
                best = v;
                best_idx = ih * d.w + iw;
              }
            }
          y[o] = best;
          if (argmax) (*argmax)[o] = best_idx;
        }
  return y;
}

Tensor max_pool2d_backward(const Tensor& grad_out, const std::vector<int>& argmax, const Shape& in_shape) {
  const auto d = Dims4::of(in_shape);
  const auto od = Dims4::of(grad_out.shape());
  Tensor gx(in_shape);
  for (int nc = 0; nc < od.n * od.c; ++nc)
    for (std::size_t p = 0; p < od.plane(); ++p) {
      const std::size_t o = nc * od.plane() + p;
      gx[nc * d.plane() + argmax[o]] += grad_out[o];
    }
  return gx;
}

}  // namespace gatector::kernels::serial
