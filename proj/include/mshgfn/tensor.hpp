#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mshgfn {

using Shape = std::vector<std::size_t>;

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // pulls from this->grad into parents' grad

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Dense row-major tensor, a value-semantic handle onto a shared autodiff node.
// Ops on grad-requiring tensors record their adjoint as a closure; backward()
// replays the recorded graph in reverse topological order.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
      : node_(std::make_shared<TensorNode>()) {
    node_->shape = std::move(shape);
    node_->value.assign(shape_numel(node_->shape), fill);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->ensure_grad();
  }

  static Tensor from_values(Shape shape, std::vector<double> v,
                            bool requires_grad = false) {
    if (shape_numel(shape) != v.size())
      throw DimensionError("value count " + std::to_string(v.size()) +
                           " does not match shape " + shape_str(shape));
    Tensor t(std::move(shape), 0.0, requires_grad);
    t.node_->value = std::move(v);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->value[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }

  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  double& at(std::size_t i) { return node_->value[i]; }
  double at(std::size_t i) const { return node_->value[i]; }
  double& at2(std::size_t i, std::size_t j) {
    return node_->value[i * node_->shape[1] + j];
  }
  double at2(std::size_t i, std::size_t j) const {
    return node_->value[i * node_->shape[1] + j];
  }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return node_->value[(i * node_->shape[1] + j) * node_->shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return node_->value[(i * node_->shape[1] + j) * node_->shape[2] + k];
  }

  void zero_grad() {
    if (node_->requires_grad || !node_->grad.empty())
      node_->grad.assign(node_->value.size(), 0.0);
  }

  std::shared_ptr<TensorNode> node() const { return node_; }

  bool defined() const { return node_ != nullptr; }

  // Zeroes grad buffers of every node reachable from this one.
  void zero_graph_grads() const {
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{node_.get()};
    while (!stack.empty()) {
      TensorNode* n = stack.back();
      stack.pop_back();
      if (!seen.insert(n).second) continue;
      if (!n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
      for (auto& p : n->parents) stack.push_back(p.get());
    }
  }

  void backward() const {
    if (size() != 1)
      throw std::invalid_argument("backward requires a scalar root, got " +
                                  shape_str(shape()));
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    topo(node_.get(), seen, order);
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
  }

  // Internal: builds an op result node wired to its inputs.
  static Tensor make_op(Shape shape, std::vector<double> value,
                        std::vector<Tensor> inputs,
                        std::function<void(TensorNode*)> backprop) {
    Tensor out = from_values(std::move(shape), std::move(value));
    bool needs = false;
    for (auto& in : inputs) needs = needs || in.node_->requires_grad;
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->ensure_grad();
      for (auto& in : inputs) {
        out.node_->parents.push_back(in.node_);
        in.node_->ensure_grad();
      }
      TensorNode* self = out.node_.get();
      out.node_->backprop = [self, fn = std::move(backprop)]() { fn(self); };
    }
    return out;
  }

 private:
  static void topo(TensorNode* n, std::unordered_set<TensorNode*>& seen,
                   std::vector<TensorNode*>& order) {
    // Iterative DFS; graphs from long unrolled loops overflow the stack
    // with the recursive version.
    struct Frame {
      TensorNode* node;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!seen.insert(n).second) return;
    stack.push_back({n, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.node->parents.size()) {
        TensorNode* p = f.node->parents[f.next_parent++].get();
        if (seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<TensorNode> node_;
};

inline void fill_uniform(Tensor& t, double lo, double hi,
                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = dist(rng);
}

// Uniform Xavier/Glorot for a fan_in x fan_out projection.
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                             std::mt19937_64& rng) {
  Tensor t({fan_in, fan_out}, 0.0, true);
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  fill_uniform(t, -limit, limit, rng);
  return t;
}

}  // namespace mshgfn
