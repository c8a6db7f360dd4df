#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gatector/nn/layers.hpp"

namespace gatector::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over every parameter in a store. Parameters without a gradient this
/// step are left untouched (their moments are not decayed).
class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig config);

  void step();
  std::int64_t steps() const { return t_; }

  // checkpoint access
  std::map<std::string, Tensor>& first_moments() { return m_; }
  std::map<std::string, Tensor>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  ParameterStore& store_;
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

}  // namespace gatector::nn
