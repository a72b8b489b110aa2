#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ltood/ndcore/tape.hpp"

namespace ltood::nd {

// Builds a scalar loss from leaf variables recorded on the given tape.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients of `f` at `point` against central
// differences with step `h`. The error per coordinate is
// |analytic - numeric| / max(1, |analytic|); the maximum is returned.
// Throws NonFiniteError if any evaluation is not finite.
GradCheckResult grad_check(const ScalarGraph& f, std::vector<Tensor> point,
                           double h = 1e-5);

}  // namespace ltood::nd
