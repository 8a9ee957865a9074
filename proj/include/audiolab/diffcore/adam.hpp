// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "audiolab/diffcore/params.hpp"

namespace audiolab::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamStore. Gradients are left in place after a
// step; the trainer clears them explicitly via ParamStore::zero_grads().
class Adam {
public:
  Adam(ParamStore& store, AdamConfig cfg = {});

  // Applies one update at the given learning rate. lr = 0 still advances the
  // moment estimates and the step counter.
  void step(double lr);

  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

private:
  struct Slot {
    std::vector<double> m, v;
  };
  ParamStore* store_;
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  long step_ = 0;
};

}  // namespace audiolab::diff
