#pragma once

#include <functional>
#include <vector>

#include "prefopt/tensor.hpp"

namespace prefopt::ad {

// Reverse-mode tape. Primitives compute values eagerly; when any input
// requires a gradient, a node with a local-gradient closure is recorded.
// backward() replays nodes in reverse insertion order, which visits every
// node after all of its consumers. A tape lives for one training step and
// is reset or discarded after backward; it must not be shared across
// concurrent callers (independent tapes in parallel workers are fine).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Elementwise, same shape required.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  // x * c and x + c with a compile-time constant.
  Tensor scale(const Tensor& a, double c);
  Tensor add_const(const Tensor& a, double c);
  Tensor neg(const Tensor& a) { return scale(a, -1.0); }

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  // (N,C) + (C,) broadcast over rows.
  Tensor add_rowvec(const Tensor& m, const Tensor& v);

  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor tanh(const Tensor& a);
  // softplus(x) = max(x,0) + log1p(exp(-|x|)); log_sigmoid(x) = -softplus(-x).
  Tensor softplus(const Tensor& a);
  Tensor log_sigmoid(const Tensor& a);
  Tensor pow(const Tensor& a, double exponent);

  // Log-softmax over the last axis (rank 1 or 2).
  Tensor log_softmax(const Tensor& a);

  // Row gather: (N,C) + ids -> (len(ids), C).
  Tensor gather_rows(const Tensor& a, std::vector<int64_t> ids);
  // Per-row element pick: (N,C) + ids of length N -> (N,).
  Tensor select_cols(const Tensor& a, std::vector<int64_t> ids);

  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor reshape(const Tensor& a, std::vector<int64_t> shape);
  // n scalars -> (n,).
  Tensor stack_scalars(const std::vector<Tensor>& xs);

  // Propagates d(loss)/d(x) into every requires_grad leaf reachable from
  // `loss`. Leaf gradients accumulate across repeated calls; intermediate
  // gradients are recomputed each call.
  void backward(const Tensor& loss);

  // Drops all nodes and zeroes the gradients of every tensor this tape touched.
  void reset();

  size_t node_count() const { return nodes_.size(); }

 private:
  // The closure receives the output gradient and accumulates into the input
  // gradients it captured.
  using Backprop = std::function<void(std::span<const double>)>;

  struct Node {
    std::shared_ptr<TensorStorage> out;
    Backprop backprop;
  };

  Tensor make_output(std::vector<int64_t> shape, std::vector<double> values,
                     const std::vector<const Tensor*>& inputs, Backprop backprop);
  void track(const Tensor& t);

  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<TensorStorage>> tracked_;
};

}  // namespace prefopt::ad
