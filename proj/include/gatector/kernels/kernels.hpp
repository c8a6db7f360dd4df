#pragma once

// Dense NCHW kernels used by the autograd ops.
//
// Two implementations share one interface: `serial` is a direct-loop reference
// kept for testing, `parallel` is the im2col + GEMM path with OpenMP over
// channels/planes. Gradient outputs are overwritten, never accumulated.

#include <vector>

#include "gatector/tensor/tensor.hpp"

namespace gatector::kernels {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

inline int conv_out_size(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }
inline int deconv_out_size(int in, int kernel, int stride, int pad) { return (in - 1) * stride - 2 * pad + kernel; }

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, const float* b, float beta,
          float* c);

struct GroupNormCache {
  std::vector<float> mean;  // (N, G)
  std::vector<float> rstd;  // (N, G)
};

#define GATECTOR_KERNEL_API                                                                                        \
  /* weight (Cout, Cin, k, k); bias (Cout) or null */                                                              \
  Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g);                        \
  void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g,             \
                       Tensor* grad_x, Tensor* grad_w, Tensor* grad_b);                                            \
  /* weight (Cin, Cout, k, k); bias (Cout) or null */                                                              \
  Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g);              \
  void conv_transpose2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvGeometry g,    \
                                 Tensor* grad_x, Tensor* grad_w, Tensor* grad_b);                                  \
  Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, float eps,               \
                    GroupNormCache* cache);                                                                        \
  void group_norm_backward(const Tensor& x, const Tensor& gamma, const Tensor& grad_out, int groups,                \
                           const GroupNormCache& cache, Tensor* grad_x, Tensor* grad_gamma, Tensor* grad_beta);    \
  /* half-pixel centers, edge clamped */                                                                           \
  Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);                                                   \
  Tensor resize_bilinear_backward(const Tensor& grad_out, int in_h, int in_w);                                     \
  Tensor max_pool2d(const Tensor& x, int kernel, int stride, std::vector<int>* argmax);                            \
  Tensor max_pool2d_backward(const Tensor& grad_out, const std::vector<int>& argmax, const Shape& in_shape);

namespace serial {
GATECTOR_KERNEL_API
}  // namespace serial

namespace parallel {
GATECTOR_KERNEL_API
}  // namespace parallel

#undef GATECTOR_KERNEL_API

}  // namespace gatector::kernels
