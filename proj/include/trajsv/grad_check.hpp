#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trajsv/param_store.hpp"

namespace trajsv::tensor {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;  // scalar entries compared
  bool passed = false;
  std::vector<GradCheckEntry> per_param;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences (step h) for every entry of every parameter. Relative error
/// is |a - n| / max(1e-8, |a| + |n|). `loss_fn` must rebuild its graph on
/// each call and be deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamStore& params, double tol,
                           double h = 1e-5);

/// Same comparison for an explicit list of leaves (used for op-level checks).
GradCheckReport grad_check_leaves(const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                                  double tol, double h = 1e-5);

}  // namespace trajsv::tensor
