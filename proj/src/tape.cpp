#include "prefopt/tape.hpp"

#include <algorithm>
#include <cmath>

#include "prefopt/error.hpp"

namespace prefopt::ad {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrKind::shape, op, ": shape mismatch ", shape_str(a.shape()), " vs ",
         shape_str(b.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double t = std::exp(x);
  return t / (1.0 + t);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Rows/cols view of a rank-1 or rank-2 tensor.
void as_rows(const char* op, const Tensor& a, int64_t& rows, int64_t& cols) {
  if (a.rank() == 1) {
    rows = 1;
    cols = a.dim(0);
  } else if (a.rank() == 2) {
    rows = a.dim(0);
    cols = a.dim(1);
  } else {
    fail(ErrKind::shape, op, ": expected rank 1 or 2, got ", shape_str(a.shape()));
  }
}

// Accumulates g into the storage's grad unless it belongs to a frozen leaf.
void acc(const std::shared_ptr<TensorStorage>& s, size_t i, double g) {
  if (s->requires_grad) s->grad[i] += g;
}

}  // namespace

void Tape::track(const Tensor& t) { tracked_.push_back(t.storage()); }

Tensor Tape::make_output(std::vector<int64_t> shape, std::vector<double> values,
                         const std::vector<const Tensor*>& inputs,
                         Backprop backprop) {
  bool needs_grad = false;
  for (const Tensor* in : inputs) needs_grad = needs_grad || in->requires_grad();

  auto s = std::make_shared<TensorStorage>();
  s->shape = std::move(shape);
  s->values = std::make_shared<std::vector<double>>(std::move(values));
  s->grad.assign(s->values->size(), 0.0);
  s->requires_grad = needs_grad;
  Tensor out(s);

  if (needs_grad) {
    s->tape = this;
    s->node_id = static_cast<int64_t>(nodes_.size());
    nodes_.push_back(Node{s, std::move(backprop)});
    for (const Tensor* in : inputs) track(*in);
    track(out);
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    fail(ErrKind::shape, "backward: loss must be a scalar, got ",
         loss.defined() ? shape_str(loss.shape()) : "<undefined>");
  if (loss.tape() != this || loss.node_id() < 0)
    fail(ErrKind::value,
         "backward: loss was not produced by a primitive recorded on this tape "
         "(detached graph)");

  // Leaf gradients accumulate across calls; intermediates are recomputed.
  for (auto& s : tracked_)
    if (s->node_id >= 0) std::fill(s->grad.begin(), s->grad.end(), 0.0);

  loss.storage()->grad[0] = 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    n.backprop(n.out->grad);
  }
}

void Tape::reset() {
  for (auto& s : tracked_) std::fill(s->grad.begin(), s->grad.end(), 0.0);
  tracked_.clear();
  nodes_.clear();
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  auto sa = a.storage(), sb = b.storage();
  return make_output(a.shape(), std::move(out), {&a, &b},
                     [sa, sb](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) {
                         acc(sa, i, g[i]);
                         acc(sb, i, g[i]);
                       }
                     });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  for (size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
  auto sa = a.storage(), sb = b.storage();
  return make_output(a.shape(), std::move(out), {&a, &b},
                     [sa, sb](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) {
                         acc(sa, i, g[i]);
                         acc(sb, i, -g[i]);
                       }
                     });
}

Tensor Tape::scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= c;
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, c](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) acc(sa, i, c * g[i]);
                     });
}

Tensor Tape::add_const(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v += c;
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) acc(sa, i, g[i]);
                     });
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    fail(ErrKind::shape, "matmul: cannot multiply ", shape_str(a.shape()), " by ",
         shape_str(b.shape()));
  const int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(static_cast<size_t>(n * m), 0.0);
  const auto av = a.values(), bv = b.values();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      for (int64_t j = 0; j < m; ++j) out[i * m + j] += aik * bv[kk * m + j];
    }
  auto sa = a.storage(), sb = b.storage();
  return make_output({n, m}, std::move(out), {&a, &b},
                     [sa, sb, n, k, m](std::span<const double> g) {
                       const auto& av = *sa->values;
                       const auto& bv = *sb->values;
                       if (sa->requires_grad)
                         for (int64_t i = 0; i < n; ++i)
                           for (int64_t j = 0; j < m; ++j) {
                             const double gij = g[i * m + j];
                             if (gij == 0.0) continue;
                             for (int64_t kk = 0; kk < k; ++kk)
                               sa->grad[i * k + kk] += gij * bv[kk * m + j];
                           }
                       if (sb->requires_grad)
                         for (int64_t i = 0; i < n; ++i)
                           for (int64_t kk = 0; kk < k; ++kk) {
                             const double aik = av[i * k + kk];
                             if (aik == 0.0) continue;
                             for (int64_t j = 0; j < m; ++j)
                               sb->grad[kk * m + j] += aik * g[i * m + j];
                           }
                     });
}

Tensor Tape::transpose(const Tensor& a) {
  if (a.rank() != 2)
    fail(ErrKind::shape, "transpose: expected rank 2, got ", shape_str(a.shape()));
  const int64_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out[j * rows + i] = a.values()[i * cols + j];
  auto sa = a.storage();
  return make_output({cols, rows}, std::move(out), {&a},
                     [sa, rows, cols](std::span<const double> g) {
                       if (!sa->requires_grad) return;
                       for (int64_t i = 0; i < rows; ++i)
                         for (int64_t j = 0; j < cols; ++j)
                           sa->grad[i * cols + j] += g[j * rows + i];
                     });
}

Tensor Tape::add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0))
    fail(ErrKind::shape, "add_rowvec: cannot broadcast ", shape_str(v.shape()),
         " over rows of ", shape_str(m.shape()));
  const int64_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(m.values().begin(), m.values().end());
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out[i * cols + j] += v.values()[j];
  auto sm = m.storage(), sv = v.storage();
  return make_output({rows, cols}, std::move(out), {&m, &v},
                     [sm, sv, rows, cols](std::span<const double> g) {
                       for (int64_t i = 0; i < rows; ++i)
                         for (int64_t j = 0; j < cols; ++j) {
                           acc(sm, i * cols + j, g[i * cols + j]);
                           acc(sv, j, g[i * cols + j]);
                         }
                     });
}

Tensor Tape::exp(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = std::exp(v);
  auto sa = a.storage();
  std::vector<double> saved(out);
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, saved = std::move(saved)](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] * saved[i]);
                     });
}

Tensor Tape::log(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i] <= 0.0)
      fail(ErrKind::domain, "log: non-positive input ", out[i], " at index ", i);
    out[i] = std::log(out[i]);
  }
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] / (*sa->values)[i]);
                     });
}

Tensor Tape::sigmoid(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = stable_sigmoid(v);
  auto sa = a.storage();
  std::vector<double> saved(out);
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, saved = std::move(saved)](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] * saved[i] * (1.0 - saved[i]));
                     });
}

Tensor Tape::tanh(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = std::tanh(v);
  auto sa = a.storage();
  std::vector<double> saved(out);
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, saved = std::move(saved)](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] * (1.0 - saved[i] * saved[i]));
                     });
}

Tensor Tape::softplus(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = stable_softplus(v);
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] * stable_sigmoid((*sa->values)[i]));
                     });
}

Tensor Tape::log_sigmoid(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = -stable_softplus(-v);
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i)
                         acc(sa, i, g[i] * stable_sigmoid(-(*sa->values)[i]));
                     });
}

Tensor Tape::pow(const Tensor& a, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  std::vector<double> out(a.values().begin(), a.values().end());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    if (!integral && x <= 0.0)
      fail(ErrKind::domain, "pow: non-integer exponent ", exponent,
           " needs positive input, got ", x, " at index ", i);
    if (integral && exponent < 0.0 && x == 0.0)
      fail(ErrKind::domain, "pow: negative exponent ", exponent,
           " needs non-zero input at index ", i);
    out[i] = std::pow(x, exponent);
  }
  auto sa = a.storage();
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, exponent](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) {
                         const double x = (*sa->values)[i];
                         const double d = exponent == 0.0
                                              ? 0.0
                                              : exponent * std::pow(x, exponent - 1.0);
                         acc(sa, i, g[i] * d);
                       }
                     });
}

Tensor Tape::log_softmax(const Tensor& a) {
  int64_t rows = 0, cols = 0;
  as_rows("log_softmax", a, rows, cols);
  std::vector<double> out(a.values().begin(), a.values().end());
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double lse = 0.0;
    for (int64_t c = 0; c < cols; ++c) lse += std::exp(row[c] - mx);
    lse = mx + std::log(lse);
    for (int64_t c = 0; c < cols; ++c) row[c] -= lse;
  }
  auto sa = a.storage();
  std::vector<double> saved(out);
  return make_output(a.shape(), std::move(out), {&a},
                     [sa, saved = std::move(saved), rows, cols](std::span<const double> g) {
                       for (int64_t r = 0; r < rows; ++r) {
                         double gsum = 0.0;
                         for (int64_t c = 0; c < cols; ++c) gsum += g[r * cols + c];
                         for (int64_t c = 0; c < cols; ++c)
                           acc(sa, r * cols + c,
                               g[r * cols + c] - std::exp(saved[r * cols + c]) * gsum);
                       }
                     });
}

Tensor Tape::gather_rows(const Tensor& a, std::vector<int64_t> ids) {
  if (a.rank() != 2)
    fail(ErrKind::shape, "gather_rows: expected rank 2, got ", shape_str(a.shape()));
  const int64_t n = a.dim(0), cols = a.dim(1);
  for (int64_t id : ids)
    if (id < 0 || id >= n)
      fail(ErrKind::value, "gather_rows: row index ", id, " out of range [0,", n, ")");
  const int64_t picked = static_cast<int64_t>(ids.size());
  std::vector<double> out(static_cast<size_t>(picked * cols));
  for (int64_t i = 0; i < picked; ++i)
    std::copy_n(a.values().data() + ids[i] * cols, cols, out.data() + i * cols);
  auto sa = a.storage();
  return make_output({picked, cols}, std::move(out), {&a},
                     [sa, ids = std::move(ids), cols](std::span<const double> g) {
                       if (!sa->requires_grad) return;
                       for (size_t i = 0; i < ids.size(); ++i)
                         for (int64_t c = 0; c < cols; ++c)
                           sa->grad[ids[i] * cols + c] += g[i * cols + c];
                     });
}

Tensor Tape::select_cols(const Tensor& a, std::vector<int64_t> ids) {
  if (a.rank() != 2)
    fail(ErrKind::shape, "select_cols: expected rank 2, got ", shape_str(a.shape()));
  const int64_t rows = a.dim(0), cols = a.dim(1);
  if (static_cast<int64_t>(ids.size()) != rows)
    fail(ErrKind::shape, "select_cols: need one index per row (", rows, "), got ",
         ids.size());
  for (int64_t id : ids)
    if (id < 0 || id >= cols)
      fail(ErrKind::value, "select_cols: column index ", id, " out of range [0,", cols,
           ")");
  std::vector<double> out(static_cast<size_t>(rows));
  for (int64_t i = 0; i < rows; ++i) out[i] = a.values()[i * cols + ids[i]];
  auto sa = a.storage();
  return make_output({rows}, std::move(out), {&a},
                     [sa, ids = std::move(ids), cols](std::span<const double> g) {
                       if (!sa->requires_grad) return;
                       for (size_t i = 0; i < ids.size(); ++i)
                         sa->grad[i * cols + ids[i]] += g[i];
                     });
}

Tensor Tape::sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  auto sa = a.storage();
  return make_output({1}, {total}, {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < sa->grad.size(); ++i) acc(sa, i, g[0]);
                     });
}

Tensor Tape::mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const double n = static_cast<double>(a.numel());
  auto sa = a.storage();
  return make_output({1}, {total / n}, {&a},
                     [sa, n](std::span<const double> g) {
                       for (size_t i = 0; i < sa->grad.size(); ++i) acc(sa, i, g[0] / n);
                     });
}

Tensor Tape::reshape(const Tensor& a, std::vector<int64_t> shape) {
  if (shape_numel(shape) != a.numel())
    fail(ErrKind::shape, "reshape: cannot view ", shape_str(a.shape()), " as ",
         shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  auto sa = a.storage();
  return make_output(std::move(shape), std::move(out), {&a},
                     [sa](std::span<const double> g) {
                       for (size_t i = 0; i < g.size(); ++i) acc(sa, i, g[i]);
                     });
}

Tensor Tape::stack_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) fail(ErrKind::value, "stack_scalars: empty input");
  std::vector<double> out;
  out.reserve(xs.size());
  std::vector<const Tensor*> inputs;
  std::vector<std::shared_ptr<TensorStorage>> storages;
  for (const Tensor& x : xs) {
    if (x.numel() != 1)
      fail(ErrKind::shape, "stack_scalars: element has shape ", shape_str(x.shape()));
    out.push_back(x.values()[0]);
    inputs.push_back(&x);
    storages.push_back(x.storage());
  }
  return make_output({static_cast<int64_t>(xs.size())}, std::move(out), inputs,
                     [storages = std::move(storages)](std::span<const double> g) {
                       for (size_t i = 0; i < storages.size(); ++i)
                         acc(storages[i], 0, g[i]);
                     });
}

}  // namespace prefopt::ad
