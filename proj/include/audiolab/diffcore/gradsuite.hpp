// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "audiolab/diffcore/gradcheck.hpp"

namespace audiolab::diff {

struct NamedGradCheck {
  std::string name;
  std::function<GradCheckReport(double eps, double tol)> run;
};

// Finite-difference checks for every differentiable layer, three seeded
// random shapes each. Loss checks (cross entropy, contrastive) are appended
// by the modules that define them.
std::vector<NamedGradCheck> layer_gradient_checks(std::uint64_t seed);

struct GradSuiteLine {
  std::string name;
  double max_rel_error;
  std::size_t excluded;
  bool pass;
};

// Runs a list of checks and collects one line per check.
std::vector<GradSuiteLine> run_gradient_suite(const std::vector<NamedGradCheck>& checks,
                                              double eps, double tol);

}  // namespace audiolab::diff
