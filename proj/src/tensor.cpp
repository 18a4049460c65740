#include "prefopt/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "prefopt/error.hpp"

namespace prefopt::ad {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::leaf(std::vector<int64_t> shape, std::vector<double> values,
                    bool requires_grad) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    fail(ErrKind::shape, "leaf: shape ", shape_str(shape), " expects ", n,
         " values, got ", values.size());
  for (int64_t d : shape)
    if (d <= 0) fail(ErrKind::shape, "leaf: non-positive dimension in ", shape_str(shape));
  auto s = std::make_shared<TensorStorage>();
  s->shape = std::move(shape);
  s->values = std::make_shared<std::vector<double>>(std::move(values));
  s->grad.assign(static_cast<size_t>(n), 0.0);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return leaf({1}, {value}, requires_grad);
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
              requires_grad);
}

double Tensor::item() const {
  if (numel() != 1)
    fail(ErrKind::shape, "item: tensor has ", numel(), " elements, expected 1");
  return (*s_->values)[0];
}

Tensor Tensor::shared_value_clone(bool requires_grad) const {
  auto s = std::make_shared<TensorStorage>();
  s->shape = s_->shape;
  s->values = s_->values;
  s->grad.assign(s_->values->size(), 0.0);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

Tensor Tensor::deep_copy(bool requires_grad) const {
  auto s = std::make_shared<TensorStorage>();
  s->shape = s_->shape;
  s->values = std::make_shared<std::vector<double>>(*s_->values);
  s->grad.assign(s_->values->size(), 0.0);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

}  // namespace prefopt::ad
