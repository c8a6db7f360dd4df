#include "gatector/nn/autograd.hpp"

#include <unordered_set>

namespace gatector::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::vector<Node*> topological_order(std::span<const std::pair<Var, Tensor>> seeds) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack;
  for (const auto& [root, seed] : seeds) {
    if (!root || visited.count(root.get())) continue;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].get();
        if (child && child->requires_grad && !visited.count(child)) {
          visited.insert(child);
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  return order;
}

}  // namespace

void Node::accumulate(Tensor g) {
  require(g.shape() == value.shape(), "gradient shape " + shape_string(g.shape()) + " does not match value " +
                                          shape_string(value.shape()) + " at op '" + op + "'");
  if (grad.empty()) {
    grad = std::move(g);
    return;
  }
  float* dst = grad.data();
  const float* src = g.data();
  const std::size_t n = grad.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

Var input(Tensor value, std::string label) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(label);
  return n;
}

Var parameter(Tensor value, std::string label) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->op = std::move(label);
  return n;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_node(Tensor value, std::string op, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(op);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || (in && in->requires_grad);
  if (g_grad_enabled && needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(fn);
  } else if (g_grad_enabled) {
    // keep provenance for graph inspection even without gradients
    n->inputs = std::move(inputs);
  }
  return n;
}

void backward(std::span<const std::pair<Var, Tensor>> seeds) {
  for (const auto& [root, seed] : seeds) {
    if (root && root->requires_grad) root->accumulate(seed);
  }
  const auto order = topological_order(seeds);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward_fn || !node->has_grad()) continue;
    node->backward_fn(*node);
    // interior gradients are no longer needed once pushed to inputs
    node->grad = Tensor();
  }
}

void backward(const Var& root, Tensor seed) {
  const std::pair<Var, Tensor> s{root, std::move(seed)};
  backward(std::span<const std::pair<Var, Tensor>>(&s, 1));
}

bool depends_on(const Var& node, const Var& ancestor) {
  std::vector<const Node*> stack{node.get()};
  std::unordered_set<const Node*> seen;
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n == ancestor.get()) return true;
    if (!seen.insert(n).second) continue;
    for (const auto& in : n->inputs)
      if (in) stack.push_back(in.get());
  }
  return false;
}

}  // namespace gatector::nn
