#include "ltood/ndcore/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ltood/error.hpp"

namespace ltood::nd {

namespace {

double evaluate(const ScalarGraph& f, const std::vector<Tensor>& point) {
  Tape tape(Mode::inference);
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& p : point) leaves.push_back(tape.constant(p));
  const double v = f(tape, leaves).value().item();
  if (!std::isfinite(v)) {
    throw NonFiniteError("grad_check: non-finite function value");
  }
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& f, std::vector<Tensor> point,
                           double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : point) leaves.push_back(tape.leaf(p));
    Var loss = f(tape, leaves);
    tape.backward(loss);
    for (Var v : leaves) {
      analytic.push_back(tape.grad(v));
      analytic.back().check_finite("grad_check: analytic gradient");
    }
  }

  GradCheckResult result;
  for (std::size_t t = 0; t < point.size(); ++t) {
    for (std::size_t i = 0; i < point[t].numel(); ++i) {
      const double x0 = point[t][i];
      point[t][i] = x0 + h;
      const double fp = evaluate(f, point);
      point[t][i] = x0 - h;
      const double fm = evaluate(f, point);
      point[t][i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = t;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace ltood::nd
