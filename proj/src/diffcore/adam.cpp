// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/adam.hpp"

#include <cmath>

namespace audiolab::diff {

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {
  if (cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1 || cfg_.eps <= 0)
    throw ConfigError("Adam: invalid hyperparameters");
  slots_.resize(store.params().size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const std::size_t n = store.params()[i].tensor.numel();
    slots_[i].m.assign(n, 0.0);
    slots_[i].v.assign(n, 0.0);
  }
}

void Adam::step(double lr) {
  if (lr < 0) throw ConfigError("Adam: negative learning rate");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    auto& p = store_->params()[i];
    if (!p.tensor.has_grad())
      throw StateError("Adam: missing gradient for parameter " + p.name);
    auto g = p.tensor.grad();
    auto w = p.tensor.raw();
    auto& m = slots_[i].m;
    auto& v = slots_[i].v;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace audiolab::diff
