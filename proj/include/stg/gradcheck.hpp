#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stg/tensor.hpp"

namespace stg {

struct GradCheckReport {
  Scalar max_rel_err = 0;
  std::string worst_name;
  Index worst_row = 0;
  Index worst_col = 0;
};

// Central finite differences against analytic gradients.
//   objective: evaluates the scalar at the current parameter values without
//              touching gradients (must be deterministic; dropout disabled)
//   compute_grads: clears gradients, then runs one forward+backward
//   params: named tensors to perturb coordinate by coordinate
// Relative error per coordinate: |a - n| / max(1, |a|, |n|).
GradCheckReport finite_difference_check(const std::function<Scalar()>& objective,
                                        const std::function<void()>& compute_grads,
                                        const std::vector<std::pair<std::string, Tensor>>& params,
                                        Scalar h = 1e-5);

}  // namespace stg
