#include "gatector/nn/adam.hpp"

#include <cmath>

namespace gatector::nn {

Adam::Adam(ParameterStore& store, AdamConfig config) : store_(store), config_(config) {
  for (const auto& [name, p] : store_.entries()) {
    m_.emplace(name, Tensor(p->value.shape()));
    v_.emplace(name, Tensor(p->value.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const float step_size = static_cast<float>(config_.lr / bc1);
  const float b1 = static_cast<float>(config_.beta1), b2 = static_cast<float>(config_.beta2);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(config_.eps);
  for (const auto& [name, p] : store_.entries()) {
    if (!p->has_grad()) continue;
    float* w = p->value.data();
    const float* g = p->grad.data();
    float* m = m_.at(name).data();
    float* v = v_.at(name).data();
    const std::size_t n = p->value.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace gatector::nn
