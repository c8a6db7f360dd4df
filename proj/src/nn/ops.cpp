#include "gatector/nn/ops.hpp"

#include <cmath>

#include "gatector/defocus/defocus.hpp"

namespace gatector::nn {

namespace kp = kernels::parallel;

namespace {

bool wants(const Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i] && self.inputs[i]->requires_grad;
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, kernels::ConvGeometry g) {
  Tensor y = kp::conv2d(x->value, weight->value, bias ? &bias->value : nullptr, g);
  return make_node(std::move(y), "conv2d", {x, weight, bias}, [g](Node& self) {
    Tensor gx, gw, gb;
    kp::conv2d_backward(self.inputs[0]->value, self.inputs[1]->value, self.grad, g, wants(self, 0) ? &gx : nullptr,
                        wants(self, 1) ? &gw : nullptr, wants(self, 2) ? &gb : nullptr);
    if (wants(self, 0)) self.inputs[0]->accumulate(std::move(gx));
    if (wants(self, 1)) self.inputs[1]->accumulate(std::move(gw));
    if (wants(self, 2)) self.inputs[2]->accumulate(std::move(gb));
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, kernels::ConvGeometry g) {
  Tensor y = kp::conv_transpose2d(x->value, weight->value, bias ? &bias->value : nullptr, g);
  return make_node(std::move(y), "conv_transpose2d", {x, weight, bias}, [g](Node& self) {
    Tensor gx, gw, gb;
    kp::conv_transpose2d_backward(self.inputs[0]->value, self.inputs[1]->value, self.grad, g,
                                  wants(self, 0) ? &gx : nullptr, wants(self, 1) ? &gw : nullptr,
                                  wants(self, 2) ? &gb : nullptr);
    if (wants(self, 0)) self.inputs[0]->accumulate(std::move(gx));
    if (wants(self, 1)) self.inputs[1]->accumulate(std::move(gw));
    if (wants(self, 2)) self.inputs[2]->accumulate(std::move(gb));
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, float eps) {
  kernels::GroupNormCache cache;
  Tensor y = kp::group_norm(x->value, gamma->value, beta->value, groups, eps, &cache);
  return make_node(std::move(y), "group_norm", {x, gamma, beta}, [groups, cache = std::move(cache)](Node& self) {
    Tensor gx, gg, gb;
    kp::group_norm_backward(self.inputs[0]->value, self.inputs[1]->value, self.grad, groups, cache,
                            wants(self, 0) ? &gx : nullptr, wants(self, 1) ? &gg : nullptr,
                            wants(self, 2) ? &gb : nullptr);
    if (wants(self, 0)) self.inputs[0]->accumulate(std::move(gx));
    if (wants(self, 1)) self.inputs[1]->accumulate(std::move(gg));
    if (wants(self, 2)) self.inputs[2]->accumulate(std::move(gb));
  });
}

Var relu(const Var& x) {
  Tensor y(x->value.shape());
  const float* src = x->value.data();
  float* dst = y.data();
  const std::size_t n = y.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return make_node(std::move(y), "relu", {x}, [](Node& self) {
    Tensor gx(self.value.shape());
    const float* out = self.value.data();
    const float* go = self.grad.data();
    float* g = gx.data();
    const std::size_t n = gx.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) g[i] = out[i] > 0.0f ? go[i] : 0.0f;
    self.inputs[0]->accumulate(std::move(gx));
  });
}

Var sigmoid(const Var& x) {
  Tensor y(x->value.shape());
  const float* src = x->value.data();
  float* dst = y.data();
  const std::size_t n = y.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = 1.0f / (1.0f + std::exp(-src[i]));
  return make_node(std::move(y), "sigmoid", {x}, [](Node& self) {
    Tensor gx(self.value.shape());
    const float* out = self.value.data();
    const float* go = self.grad.data();
    float* g = gx.data();
    const std::size_t n = gx.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) g[i] = go[i] * out[i] * (1.0f - out[i]);
    self.inputs[0]->accumulate(std::move(gx));
  });
}

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch " + shape_string(a->value.shape()) + " vs " +
                                             shape_string(b->value.shape()));
  Tensor y(a->value.shape());
  const float* pa = a->value.data();
  const float* pb = b->value.data();
  float* dst = y.data();
  const std::size_t n = y.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = pa[i] + pb[i];
  return make_node(std::move(y), "add", {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) self.inputs[1]->accumulate(self.grad);
  });
}

Var mul_channel_broadcast(const Var& x, const Var& gate) {
  const auto d = Dims4::of(x->value.shape());
  const auto gd = Dims4::of(gate->value.shape());
  require(gd.n == d.n && gd.c == 1 && gd.h == d.h && gd.w == d.w, "mul_channel_broadcast: gate shape mismatch");
  Tensor y(x->value.shape());
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const int n = nc / d.c;
    const float* gp = gate->value.data() + n * d.plane();
    const float* xp = x->value.data() + nc * d.plane();
    float* yp = y.data() + nc * d.plane();
    for (std::size_t p = 0; p < d.plane(); ++p) yp[p] = xp[p] * gp[p];
  }
  return make_node(std::move(y), "mul_channel_broadcast", {x, gate}, [d](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor gx(xv.shape());
#pragma omp parallel for schedule(static)
      for (int nc = 0; nc < d.n * d.c; ++nc) {
        const float* gp = gv.data() + (nc / d.c) * d.plane();
        const float* go = self.grad.data() + nc * d.plane();
        float* dst = gx.data() + nc * d.plane();
        for (std::size_t p = 0; p < d.plane(); ++p) dst[p] = go[p] * gp[p];
      }
      self.inputs[0]->accumulate(std::move(gx));
    }
    if (wants(self, 1)) {
      Tensor gg(gv.shape());
#pragma omp parallel for schedule(static)
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
          const std::size_t off = (static_cast<std::size_t>(n) * d.c + c) * d.plane();
          float* dst = gg.data() + n * d.plane();
          for (std::size_t p = 0; p < d.plane(); ++p) dst[p] += self.grad[off + p] * xv[off + p];
        }
      self.inputs[1]->accumulate(std::move(gg));
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  const auto d0 = Dims4::of(xs[0]->value.shape());
  int channels = 0;
  for (const auto& x : xs) {
    const auto d = Dims4::of(x->value.shape());
    require(d.n == d0.n && d.h == d0.h && d.w == d0.w, "concat_channels: batch/spatial mismatch");
    channels += d.c;
  }
  Tensor y({d0.n, channels, d0.h, d0.w});
  int offset = 0;
  for (const auto& x : xs) {
    const auto d = Dims4::of(x->value.shape());
    for (int n = 0; n < d.n; ++n)
      std::copy_n(x->value.data() + n * d.image(), d.image(),
                  y.data() + (static_cast<std::size_t>(n) * channels + offset) * d.plane());
    offset += d.c;
  }
  return make_node(std::move(y), "concat_channels", xs, [channels](Node& self) {
    int offset = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const auto d = Dims4::of(self.inputs[i]->value.shape());
      if (wants(self, i)) {
        Tensor gx(self.inputs[i]->value.shape());
        for (int n = 0; n < d.n; ++n)
          std::copy_n(self.grad.data() + (static_cast<std::size_t>(n) * channels + offset) * d.plane(), d.image(),
                      gx.data() + n * d.image());
        self.inputs[i]->accumulate(std::move(gx));
      }
      offset += d.c;
    }
  });
}

Var defocus(const Var& x, int ratio) {
  return make_node(gatector::defocus(x->value, ratio), "defocus", {x},
                   [ratio](Node& self) { self.inputs[0]->accumulate(gatector::focus(self.grad, ratio)); });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const auto d = Dims4::of(x->value.shape());
  return make_node(kp::resize_bilinear(x->value, out_h, out_w), "resize_bilinear", {x}, [d](Node& self) {
    self.inputs[0]->accumulate(kp::resize_bilinear_backward(self.grad, d.h, d.w));
  });
}

Var max_pool2d(const Var& x, int kernel, int stride) {
  std::vector<int> argmax;
  Tensor y = kp::max_pool2d(x->value, kernel, stride, &argmax);
  return make_node(std::move(y), "max_pool2d", {x}, [argmax = std::move(argmax)](Node& self) {
    self.inputs[0]->accumulate(kp::max_pool2d_backward(self.grad, argmax, self.inputs[0]->value.shape()));
  });
}

Var global_avg_pool(const Var& x) {
  const auto d = Dims4::of(x->value.shape());
  Tensor y({d.n, d.c, 1, 1});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    double s = 0.0;
    const float* p = x->value.data() + nc * d.plane();
    for (std::size_t i = 0; i < d.plane(); ++i) s += p[i];
    y[nc] = static_cast<float>(s / d.plane());
  }
  return make_node(std::move(y), "global_avg_pool", {x}, [d](Node& self) {
    Tensor gx(self.inputs[0]->value.shape());
    const float inv = 1.0f / static_cast<float>(d.plane());
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      float* p = gx.data() + nc * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) p[i] = self.grad[nc] * inv;
    }
    self.inputs[0]->accumulate(std::move(gx));
  });
}

Var reshape(const Var& x, Shape shape) {
  return make_node(x->value.reshaped(std::move(shape)), "reshape", {x}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad.reshaped(self.inputs[0]->value.shape()));
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const int n = x->value.dim(0);
  const int f = static_cast<int>(x->value.size() / n);
  const int o = weight->value.dim(0);
  require(weight->value.dim(1) == f, "linear: feature size mismatch");
  Tensor y({n, o, 1, 1});
  kernels::gemm(false, true, n, o, f, 1.0f, x->value.data(), weight->value.data(), 0.0f, y.data());
  if (bias)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < o; ++j) y[static_cast<std::size_t>(i) * o + j] += bias->value[j];
  return make_node(std::move(y), "linear", {x, weight, bias}, [n, f, o](Node& self) {
    if (wants(self, 0)) {
      Tensor gx(self.inputs[0]->value.shape());
      kernels::gemm(false, false, n, f, o, 1.0f, self.grad.data(), self.inputs[1]->value.data(), 0.0f, gx.data());
      self.inputs[0]->accumulate(std::move(gx));
    }
    if (wants(self, 1)) {
      Tensor gw(self.inputs[1]->value.shape());
      kernels::gemm(true, false, o, f, n, 1.0f, self.grad.data(), self.inputs[0]->value.data(), 0.0f, gw.data());
      self.inputs[1]->accumulate(std::move(gw));
    }
    if (wants(self, 2)) {
      Tensor gb(self.inputs[2]->value.shape());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) gb[j] += self.grad[static_cast<std::size_t>(i) * o + j];
      self.inputs[2]->accumulate(std::move(gb));
    }
  });
}

}  // namespace gatector::nn
