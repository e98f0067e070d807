#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sharp/errors.hpp"
#include "sharp/layers.hpp"
#include "sharp/tensor.hpp"

namespace sharp {

// Reverse-mode tape. Forward ops append nodes in execution order; backward
// walks the list once in reverse, which is a reverse topological order for
// the sequential graphs built here. Nodes whose gradient buffer was never
// touched received no upstream gradient and are skipped.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  int push(Tensor value, bool needs_grad, BackwardFn back = {}) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back), needs_grad, false});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  Tensor& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_alloc) {
      n.grad = Tensor(n.value.shape());
      n.grad_alloc = true;
    }
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_alloc; }

  void backward(int root) {
    if (nodes_.empty() || root < 0 || root >= static_cast<int>(nodes_.size()))
      throw UsageError("backward called without a recorded forward pass");
    if (nodes_[static_cast<std::size_t>(root)].value.numel() != 1)
      throw UsageError("backward root must be a scalar");
    grad(root)[0] = 1.0f;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad_alloc && n.back) n.back(*this, i);
    }
  }

  void clear() { nodes_.clear(); }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn back;
    bool needs_grad;
    bool grad_alloc;
  };
  std::vector<Node> nodes_;
};

// ---- op wrappers ----

inline int tape_input(Tape& t, Tensor x) { return t.push(std::move(x), false); }

inline int tape_linear(Tape& t, MaskedLinear& layer, int x) {
  Tensor y = layer.forward(t.val(x));
  return t.push(std::move(y), true, [&layer, x](Tape& tp, int self) {
    Tensor* dx = nullptr;
    if (tp.needs_grad(x)) dx = &tp.grad(x);
    layer.backward(tp.val(x), tp.grad(self), dx);
  });
}

inline int tape_conv2d(Tape& t, MaskedConv2d& layer, int x) {
  Tensor y = layer.forward(t.val(x));
  return t.push(std::move(y), true, [&layer, x](Tape& tp, int self) {
    Tensor* dx = nullptr;
    if (tp.needs_grad(x)) dx = &tp.grad(x);
    layer.backward(tp.val(x), tp.grad(self), dx);
  });
}

inline int tape_relu(Tape& t, int x) {
  Tensor y = relu_forward(t.val(x));
  const bool ng = t.needs_grad(x);
  return t.push(std::move(y), ng, [x, ng](Tape& tp, int self) {
    if (ng) relu_backward(tp.val(self), tp.grad(self), tp.grad(x));
  });
}

inline int tape_sigmoid(Tape& t, int x) {
  Tensor y = sigmoid_forward(t.val(x));
  const bool ng = t.needs_grad(x);
  return t.push(std::move(y), ng, [x, ng](Tape& tp, int self) {
    if (ng) sigmoid_backward(tp.val(self), tp.grad(self), tp.grad(x));
  });
}

inline int tape_maxpool2d(Tape& t, int x, int k, int stride) {
  auto argmax = std::make_shared<std::vector<std::int32_t>>();
  Tensor y = maxpool2d_forward(t.val(x), k, stride, argmax.get());
  const bool ng = t.needs_grad(x);
  return t.push(std::move(y), ng, [x, ng, argmax](Tape& tp, int self) {
    if (ng) maxpool2d_backward(tp.grad(self), *argmax, tp.grad(x));
  });
}

// Stacks b under a along the batch dim; backward splits the gradient.
inline int tape_concat_rows(Tape& t, int a, int b) {
  Tensor y = concat_rows(t.val(a), t.val(b));
  const bool nga = t.needs_grad(a), ngb = t.needs_grad(b);
  return t.push(std::move(y), nga || ngb, [a, b, nga, ngb](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    const std::int64_t na = tp.val(a).numel();
    if (nga) {
      Tensor& ga = tp.grad(a);
      for (std::int64_t i = 0; i < na; ++i) ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
    }
    if (ngb) {
      Tensor& gb = tp.grad(b);
      const std::int64_t nb = tp.val(b).numel();
      for (std::int64_t i = 0; i < nb; ++i)
        gb[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(na + i)];
    }
  });
}

}  // namespace sharp
