#include "gatector/nn/layers.hpp"

#include <cmath>

namespace gatector::nn {

Var ParameterStore::add(const std::string& name, Tensor init) {
  require(!find(name), "duplicate parameter name '" + name + "'");
  auto p = parameter(std::move(init), name);
  entries_.emplace_back(name, p);
  return p;
}

Var ParameterStore::normal(const std::string& name, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = static_cast<float>(dist(rng_));
  return add(name, std::move(t));
}

Var ParameterStore::filled(const std::string& name, Shape shape, float value) {
  return add(name, Tensor(std::move(shape), value));
}

Var ParameterStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const { return scalar_count(""); }

std::size_t ParameterStore::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_)
    if (name.rfind(prefix, 0) == 0) n += v->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : entries_) v->zero_grad();
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, int in_channels, int out_channels, int kernel,
               int stride, int pad, bool bias)
    : stride_(stride), pad_(pad) {
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  weight_ = store.normal(name + ".weight", {out_channels, in_channels, kernel, kernel}, std::sqrt(2.0 / fan_in));
  if (bias) bias_ = store.filled(name + ".bias", {out_channels}, 0.0f);
}

ConvTranspose2d::ConvTranspose2d(ParameterStore& store, const std::string& name, int in_channels, int out_channels,
                                 int kernel, int stride, int pad, bool bias)
    : stride_(stride), pad_(pad) {
  // each output pixel sees ~ in_channels * (kernel / stride)^2 inputs
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel / (stride * stride);
  weight_ = store.normal(name + ".weight", {in_channels, out_channels, kernel, kernel}, std::sqrt(2.0 / fan_in));
  if (bias) bias_ = store.filled(name + ".bias", {out_channels}, 0.0f);
}

int GroupNorm::groups_for(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0 && channels / g >= 2) return g;
  return 1;
}

GroupNorm::GroupNorm(ParameterStore& store, const std::string& name, int channels, bool zero_init)
    : groups_(groups_for(channels)) {
  gamma_ = store.filled(name + ".gamma", {channels}, zero_init ? 0.0f : 1.0f);
  beta_ = store.filled(name + ".beta", {channels}, 0.0f);
}

Linear::Linear(ParameterStore& store, const std::string& name, int in_features, int out_features) {
  weight_ = store.normal(name + ".weight", {out_features, in_features}, std::sqrt(1.0 / in_features));
  bias_ = store.filled(name + ".bias", {out_features}, 0.0f);
}

ConvNormAct::ConvNormAct(ParameterStore& store, const std::string& name, int in_channels, int out_channels,
                         int kernel, int stride)
    : conv_(store, name + ".conv", in_channels, out_channels, kernel, stride, kernel / 2, false),
      norm_(store, name + ".norm", out_channels) {}

}  // namespace gatector::nn
