#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mergan/graph.hpp"

namespace mergan {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Builds a scalar from the graph inputs created for each tensor of the point.
using ScalarBuilder = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares reverse-mode gradients of `fn` at `point` with central differences
/// of step `h`. The per-coordinate relative error is
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-3 * max|numeric|, 1e-12)
/// so coordinates that are tiny relative to the whole gradient do not report
/// roundoff as error. `fn` may itself call Graph::gradients, which turns this
/// into a check of second derivatives.
GradCheckReport finite_diff_check(const ScalarBuilder& fn, std::span<const Tensor> point, double h,
                                  double tolerance);

}  // namespace mergan
