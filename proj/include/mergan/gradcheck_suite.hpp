#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mergan/graph.hpp"

namespace mergan {

struct SuiteCheck {
  std::string name;
  std::string kind;  // "op", "op2" (second derivative) or "loss"
  double worst_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  bool passed = false;
};

struct SuiteOptions {
  std::size_t instances = 20;  // random networks (or random points) per check
  std::uint64_t seed = 1;
  double step = 1e-6;  // central-difference step
  /// Multiplies every adjoint contribution of this op, to prove the suite
  /// notices a broken rule.
  std::optional<Op> fault;
  double fault_factor = 1.5;
};

/// Every primitive (first and second order) and every loss of the losses
/// module against central differences. Loss checks run on freshly drawn
/// small generator/critic networks.
std::vector<SuiteCheck> run_gradcheck_suite(const SuiteOptions& options);

/// Inverse of op_name() for ops with adjoints.
std::optional<Op> parse_op(std::string_view name);

}  // namespace mergan
