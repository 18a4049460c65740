#include "prefopt/grad_check.hpp"

#include <cmath>

#include "prefopt/error.hpp"

namespace prefopt::ad {

namespace {

double eval_at(const GraphBuilder& f, const Tensor& point, size_t coord,
               double value) {
  Tensor probe = point.deep_copy(/*requires_grad=*/false);
  probe.mutable_values()[coord] = value;
  Tape tape;
  const double out = f(tape, probe).item();
  if (!std::isfinite(out))
    fail(ErrKind::domain, "grad_check: non-finite value ", out,
         " probing coordinate ", coord, " at ", value);
  return out;
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& f, const Tensor& point, double eps,
                           double tol) {
  Tensor leaf = point.deep_copy(/*requires_grad=*/true);
  Tape tape;
  Tensor loss = f(tape, leaf);
  if (loss.numel() != 1)
    fail(ErrKind::shape, "grad_check: builder must return a scalar, got ",
         shape_str(loss.shape()));
  tape.backward(loss);

  GradCheckReport report;
  for (size_t i = 0; i < static_cast<size_t>(point.numel()); ++i) {
    const double x = point.values()[i];
    const double hi = eval_at(f, point, i, x + eps);
    const double lo = eval_at(f, point, i, x - eps);
    const double numeric = (hi - lo) / (2.0 * eps);
    const double analytic = leaf.grad()[i];
    const double err = std::abs(analytic) < 1e-6
                           ? std::abs(analytic - numeric)
                           : std::abs(analytic - numeric) / std::abs(analytic);
    report.entries.push_back({i, analytic, numeric, err});
    report.max_error = std::max(report.max_error, err);
  }
  report.pass = report.max_error <= tol;
  return report;
}

}  // namespace prefopt::ad
