#pragma once

// Minimal reverse-mode autodiff over float tensors.
//
// A Var is a shared node holding a value, an accumulated gradient and a
// closure that pushes its gradient into its inputs. Parameters are leaf Vars
// that persist across steps; reusing a parameter in several places (the shared
// backbone) simply accumulates into the same gradient.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gatector/tensor/tensor.hpp"

namespace gatector::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows back
  bool requires_grad = false;
  std::string op;  // "param", "input", or the producing op
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return !grad.empty(); }
  void accumulate(Tensor g);
  void zero_grad() { grad = Tensor(); }
};

/// Non-trainable input.
Var input(Tensor value, std::string label = "input");
/// Trainable leaf.
Var parameter(Tensor value, std::string label = "param");

bool grad_enabled();

/// Disables graph recording in scope; ops then keep no inputs or closures.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Result node. `fn` runs only if some input requires grad.
Var make_node(Tensor value, std::string op, std::vector<Var> inputs, std::function<void(Node&)> fn);

/// Seeds d(loss)/d(root) for each root and propagates to every reachable leaf.
void backward(std::span<const std::pair<Var, Tensor>> seeds);
void backward(const Var& root, Tensor seed);

/// True if `ancestor` is reachable from `node` through recorded inputs.
bool depends_on(const Var& node, const Var& ancestor);

}  // namespace gatector::nn
