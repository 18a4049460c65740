#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prefopt/tape.hpp"

namespace prefopt::ad {

// Builds a scalar loss on the given tape from the given leaf point.
using GraphBuilder = std::function<Tensor(Tape&, const Tensor& point)>;

struct GradCheckEntry {
  size_t coord;
  double analytic;
  double numeric;
  double error;  // relative, or absolute where the gradient is tiny
};

struct GradCheckReport {
  bool pass = true;
  double max_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

// Compares backward gradients against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate. Relative error
// is used except where |analytic| < 1e-6, where absolute error applies.
GradCheckReport grad_check(const GraphBuilder& f, const Tensor& point, double eps,
                           double tol);

}  // namespace prefopt::ad
