// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "audiolab/common.hpp"
#include "audiolab/diffcore/tensor.hpp"

namespace audiolab::diff {

// Named trainable tensor. Names are unique within one store and stable
// across save/load; registration order defines checkpoint payload order.
struct Parameter {
  std::string name;
  Tensor tensor;
};

class ParamStore {
public:
  // Registers a trainable parameter (tensor forced to requires_grad).
  Tensor add(const std::string& name, Tensor t);
  // Registers a non-trainable buffer (e.g. batch-norm running statistics).
  Tensor add_buffer(const std::string& name, Tensor t);

  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& buffers() { return buffers_; }
  const std::vector<Parameter>& buffers() const { return buffers_; }

  void zero_grads();

  // Copies values (not structure) from another store with identical layout.
  void copy_values_from(const ParamStore& other);

  std::size_t total_values() const;
  // Hash over parameter and buffer bytes, for freeze/determinism contracts.
  std::uint64_t bytes_hash() const;

private:
  std::vector<Parameter> params_;
  std::vector<Parameter> buffers_;
  std::unordered_map<std::string, int> index_;  // >=0 params, <0 buffers (-i-1)
};

// Seeded initializers.
void init_uniform(Tensor& t, Rng& rng, double lo, double hi);
void init_normal(Tensor& t, Rng& rng, double stddev);
// Glorot/Xavier uniform for a [fan_in, fan_out] matrix (or conv kernel).
void init_glorot(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace audiolab::diff
