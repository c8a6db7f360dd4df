#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gatector/nn/ops.hpp"

namespace gatector::nn {

/// Ordered name -> parameter registry. Initialisation draws from one seeded
/// engine in registration order, so a config + seed fixes every weight.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  Var add(const std::string& name, Tensor init);
  Var normal(const std::string& name, Shape shape, double stddev);
  Var filled(const std::string& name, Shape shape, float value);

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  Var find(const std::string& name) const;
  std::size_t scalar_count() const;
  /// Scalar count of parameters whose name starts with `prefix`.
  std::size_t scalar_count(const std::string& prefix) const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>> entries_;
  std::mt19937_64 rng_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int pad, bool bias = true);
  Var operator()(const Var& x) const { return conv2d(x, weight_, bias_, {stride_, pad_}); }

  const Var& weight() const { return weight_; }
  int in_channels() const { return weight_->value.dim(1); }
  int out_channels() const { return weight_->value.dim(0); }
  int kernel() const { return weight_->value.dim(2); }
  int stride() const { return stride_; }

 private:
  Var weight_, bias_;
  int stride_ = 1, pad_ = 0;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterStore& store, const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int pad, bool bias = true);
  Var operator()(const Var& x) const { return conv_transpose2d(x, weight_, bias_, {stride_, pad_}); }

 private:
  Var weight_, bias_;
  int stride_ = 2, pad_ = 1;
};

class GroupNorm {
 public:
  GroupNorm() = default;
  /// `zero_init` starts gamma at 0 (residual branches begin as identity).
  GroupNorm(ParameterStore& store, const std::string& name, int channels, bool zero_init = false);
  Var operator()(const Var& x) const { return group_norm(x, gamma_, beta_, groups_); }

  static int groups_for(int channels);

 private:
  Var gamma_, beta_;
  int groups_ = 1;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in_features, int out_features);
  Var operator()(const Var& x) const { return linear(x, weight_, bias_); }

 private:
  Var weight_, bias_;
};

/// conv (no bias) -> group norm -> relu
class ConvNormAct {
 public:
  ConvNormAct() = default;
  ConvNormAct(ParameterStore& store, const std::string& name, int in_channels, int out_channels, int kernel, int stride);
  Var operator()(const Var& x) const { return relu(norm_(conv_(x))); }

  const Conv2d& conv() const { return conv_; }

 private:
  Conv2d conv_;
  GroupNorm norm_;
};

}  // namespace gatector::nn
