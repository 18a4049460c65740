#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace prefopt::ad {

class Tape;

// Shared dense storage. `values` sits behind its own shared_ptr so a
// parameter can be cloned for a worker with the value buffer shared
// (read-only during a batch) while the gradient buffer stays private.
struct TensorStorage {
  std::vector<int64_t> shape;
  std::shared_ptr<std::vector<double>> values;
  std::vector<double> grad;
  bool requires_grad = false;
  const Tape* tape = nullptr;  // tape that produced this tensor, null for leaves
  int64_t node_id = -1;        // index of the producing node in that tape
};

// Lightweight handle with shared-storage semantics.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(std::vector<int64_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);

  bool defined() const { return s_ != nullptr; }
  const std::vector<int64_t>& shape() const { return s_->shape; }
  int64_t numel() const { return static_cast<int64_t>(s_->values->size()); }
  int64_t dim(size_t axis) const { return s_->shape[axis]; }
  size_t rank() const { return s_->shape.size(); }

  std::span<const double> values() const { return *s_->values; }
  std::span<double> mutable_values() { return *s_->values; }
  std::span<const double> grad() const { return s_->grad; }
  std::span<double> mutable_grad() { return s_->grad; }

  bool requires_grad() const { return s_->requires_grad; }
  int64_t node_id() const { return s_->node_id; }
  const Tape* tape() const { return s_->tape; }

  // Value of a one-element tensor.
  double item() const;

  void zero_grad() { std::fill(s_->grad.begin(), s_->grad.end(), 0.0); }

  // New leaf sharing this tensor's value buffer, with a fresh zero gradient.
  Tensor shared_value_clone(bool requires_grad) const;
  // New leaf with copied values.
  Tensor deep_copy(bool requires_grad) const;

  const std::shared_ptr<TensorStorage>& storage() const { return s_; }

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<TensorStorage> s) : s_(std::move(s)) {}
  std::shared_ptr<TensorStorage> s_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

}  // namespace prefopt::ad
