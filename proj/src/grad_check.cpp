#include "trajsv/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace trajsv::tensor {

namespace {

GradCheckReport run_check(const std::function<Tensor()>& loss_fn,
                          std::vector<std::pair<std::string, Tensor>> leaves, double tol, double h) {
  for (auto& [_, t] : leaves) t.clear_grad();
  backward(loss_fn());

  GradCheckReport report;
  for (auto& [name, t] : leaves) {
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    GradCheckEntry entry{name, 0.0, analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0};
    Matrix& value = t.mutable_value();
    for (Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double up = loss_fn().item();
      value.data()[i] = saved - h;
      const double down = loss_fn().item();
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++report.checked;
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_param = name;
    }
    report.per_param.push_back(std::move(entry));
    t.clear_grad();
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamStore& params, double tol,
                           double h) {
  std::vector<std::pair<std::string, Tensor>> leaves;
  for (auto& [name, t] : params.items()) leaves.emplace_back(name, t);
  return run_check(loss_fn, std::move(leaves), tol, h);
}

GradCheckReport grad_check_leaves(const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                                  double tol, double h) {
  std::vector<std::pair<std::string, Tensor>> named;
  for (std::size_t i = 0; i < leaves.size(); ++i) named.emplace_back("leaf" + std::to_string(i), leaves[i]);
  return run_check(loss_fn, std::move(named), tol, h);
}

}  // namespace trajsv::tensor
