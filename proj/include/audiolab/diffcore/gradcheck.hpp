// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "audiolab/diffcore/tensor.hpp"

namespace audiolab::diff {

struct GradCheckInputReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // non-smooth points (e.g. max-pool ties), skipped
  bool pass = true;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = true;
  std::vector<GradCheckInputReport> inputs;
};

// Compares the analytic gradient of a deterministic scalar function against
// central finite differences (f(x+eps) - f(x-eps)) / (2 eps), elementwise.
// An element whose one-sided slopes disagree is a subgradient point and is
// excluded from pass/fail. The relative error falls back to absolute error
// where both gradients are near zero.
GradCheckReport gradient_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
    double eps, double tol, const std::vector<std::string>& input_names = {});

}  // namespace audiolab::diff
