#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weedctx/net.hpp"

namespace weedctx {

struct GradCheckOptions {
  double step = 1e-5;
  int batch = 2;
  std::uint64_t seed = 1;
  /// Denominator floor of the relative error |a - n| / max(|a| + |n|, floor).
  double rel_floor = 1e-8;
};

struct GroupCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
  /// Parameters whose +-step probe crossed a ReLU/max-pool switch and were
  /// re-probed with a smaller step.
  std::size_t refined = 0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_error = 0;
  std::size_t checked = 0;
};

/// Compares backward() against central finite differences of the f64 loss for
/// every parameter, on a random batch and randomized parameters.
GradCheckReport gradient_check(const NetworkSpec& spec, const GradCheckOptions& options = {});

}  // namespace weedctx
