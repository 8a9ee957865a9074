// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/gradcheck.hpp"

#include <cmath>

namespace audiolab::diff {

namespace {
double eval_scalar(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                   const std::vector<Tensor>& inputs) {
  const double v = f(inputs).item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: function value is non-finite");
  return v;
}
}  // namespace

GradCheckReport gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                               std::vector<Tensor> inputs, double eps, double tol,
                               const std::vector<std::string>& input_names) {
  if (eps <= 0) throw ConfigError("gradient_check: eps must be positive");

  // One analytic pass.
  for (auto& in : inputs) in.zero_grad();
  Tensor out = f(inputs);
  const double f0 = out.item();
  if (!std::isfinite(f0)) throw NumericError("gradient_check: function value is non-finite");
  out.backward();
  std::vector<std::vector<double>> analytic(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    analytic[i].assign(inputs[i].numel(), 0.0);
    if (inputs[i].requires_grad() && inputs[i].has_grad()) {
      auto g = inputs[i].grad();
      analytic[i].assign(g.begin(), g.end());
    }
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    GradCheckInputReport ir;
    ir.name = i < input_names.size() ? input_names[i] : "input" + std::to_string(i);
    if (!inputs[i].requires_grad()) {
      report.inputs.push_back(std::move(ir));
      continue;
    }
    auto vals = inputs[i].raw();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double orig = vals[j];
      vals[j] = orig + eps;
      const double fp = eval_scalar(f, inputs);
      vals[j] = orig - eps;
      const double fm = eval_scalar(f, inputs);
      vals[j] = orig;

      const double numeric = (fp - fm) / (2.0 * eps);
      const double right = (fp - f0) / eps;
      const double left = (f0 - fm) / eps;
      // One-sided slopes disagree => kink between x-eps and x+eps.
      const double slope_scale = std::max({1.0, std::fabs(left), std::fabs(right)});
      if (std::fabs(left - right) > 1e-3 * slope_scale) {
        ++ir.excluded;
        continue;
      }
      ++ir.checked;

      const double a = analytic[i][j];
      const double denom = std::max(std::fabs(a), std::fabs(numeric));
      const double err = denom < 1e-6 ? std::fabs(a - numeric) : std::fabs(a - numeric) / denom;
      ir.max_rel_error = std::max(ir.max_rel_error, err);
    }
    ir.pass = ir.max_rel_error <= tol;
    report.max_rel_error = std::max(report.max_rel_error, ir.max_rel_error);
    report.pass = report.pass && ir.pass;
    report.inputs.push_back(std::move(ir));
  }
  return report;
}

}  // namespace audiolab::diff
