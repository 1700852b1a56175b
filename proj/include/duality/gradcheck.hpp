#pragma once

#include <functional>
#include <string>
#include <vector>

#include "duality/optim.hpp"

namespace duality {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  std::size_t worst_coord = 0;
  double tape_grad = 0.0;
  double fd_grad = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool all_ok = true;
  std::string to_string() const;
};

// Central finite differences per coordinate against tape gradients.
// loss(true) must run the differentiable path and leave gradients populated;
// loss(false) must evaluate the same deterministic loss without touching
// gradients. Report-only: coordinates above tolerance are flagged, nothing
// throws.
GradCheckReport finite_difference_check(
    const std::function<double(bool compute_grads)>& loss,
    const std::vector<Parameter*>& params, double step, double tolerance);

}  // namespace duality
