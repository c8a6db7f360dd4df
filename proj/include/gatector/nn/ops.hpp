#pragma once

#include <vector>

#include "gatector/kernels/kernels.hpp"
#include "gatector/nn/autograd.hpp"

namespace gatector::nn {

Var conv2d(const Var& x, const Var& weight, const Var& bias, kernels::ConvGeometry g);
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, kernels::ConvGeometry g);
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, float eps = 1e-5f);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
/// x (N,C,H,W) * gate (N,1,H,W), gate broadcast over channels.
Var mul_channel_broadcast(const Var& x, const Var& gate);
Var concat_channels(const std::vector<Var>& xs);

Var defocus(const Var& x, int ratio);
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var max_pool2d(const Var& x, int kernel, int stride);
/// (N,C,H,W) -> (N,C,1,1)
Var global_avg_pool(const Var& x);
Var reshape(const Var& x, Shape shape);
/// x (N,F,1,1) or (N,F); weight (O,F); bias (O) -> (N,O,1,1)
Var linear(const Var& x, const Var& weight, const Var& bias);

}  // namespace gatector::nn
