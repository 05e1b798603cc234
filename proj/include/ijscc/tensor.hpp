#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ijscc/errors.hpp"

namespace ijscc {

// Channel-major dense layout: index = (c * h + y) * w + x.
struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(c) * h * w;
  }
  bool operator==(const Shape&) const = default;
};

struct Tensor;
using Var = std::shared_ptr<Tensor>;

struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;

  static Var make(Shape s, bool rg = false) {
    auto t = std::make_shared<Tensor>();
    t->shape = s;
    t->data.assign(s.size(), 0.0);
    t->requires_grad = rg;
    return t;
  }

  static Var make(Shape s, std::vector<double> d, bool rg = false) {
    if (d.size() != s.size()) throw ShapeError("tensor data/shape mismatch");
    auto t = std::make_shared<Tensor>();
    t->shape = s;
    t->data = std::move(d);
    t->requires_grad = rg;
    return t;
  }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    grad.assign(data.size(), 0.0);
  }
};

// Records one forward pass; discarded after backward so memory stays bounded
// over long optimization runs. Leaf gradients accumulate across backward
// calls, intermediate gradients are reset per call.
class Tape {
 public:
  Var record(Var out, std::function<void()> backward_fn) {
    nodes_.push_back({out, std::move(backward_fn)});
    return nodes_.back().out;
  }

  void backward(const Var& loss) {
    if (loss->data.size() != 1) throw ShapeError("backward requires a scalar loss");
    // Intermediates (tensors produced on this tape) get fresh gradient
    // buffers; leaves keep theirs so repeated backward calls accumulate.
    for (auto& n : nodes_) {
      n.out->ensure_grad();
      n.out->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward_fn) it->backward_fn();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Var out;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;
};

}  // namespace ijscc
