// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/params.hpp"

#include <cmath>

namespace audiolab::diff {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw StateError("ParamStore: duplicate parameter name: " + name);
  t.node()->requires_grad = true;
  index_[name] = static_cast<int>(params_.size());
  params_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_buffer(const std::string& name, Tensor t) {
  if (index_.count(name)) throw StateError("ParamStore: duplicate parameter name: " + name);
  index_[name] = -static_cast<int>(buffers_.size()) - 1;
  buffers_.push_back({name, t});
  return t;
}

Tensor* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return nullptr;
  return it->second >= 0 ? &params_[static_cast<std::size_t>(it->second)].tensor
                         : &buffers_[static_cast<std::size_t>(-it->second - 1)].tensor;
}

const Tensor* ParamStore::find(const std::string& name) const {
  return const_cast<ParamStore*>(this)->find(name);
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size() || other.buffers_.size() != buffers_.size())
    throw StateError("ParamStore: layout mismatch in copy_values_from");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name ||
        params_[i].tensor.shape() != other.params_[i].tensor.shape())
      throw StateError("ParamStore: parameter mismatch at " + params_[i].name);
    std::copy(other.params_[i].tensor.data().begin(), other.params_[i].tensor.data().end(),
              params_[i].tensor.raw().begin());
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i)
    std::copy(other.buffers_[i].tensor.data().begin(), other.buffers_[i].tensor.data().end(),
              buffers_[i].tensor.raw().begin());
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  for (const auto& b : buffers_) n += b.tensor.numel();
  return n;
}

std::uint64_t ParamStore::bytes_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params_) {
    h = fnv1a64(p.name, h);
    h = fnv1a64(p.tensor.data().data(), p.tensor.numel() * sizeof(double), h);
  }
  for (const auto& b : buffers_) {
    h = fnv1a64(b.name, h);
    h = fnv1a64(b.tensor.data().data(), b.tensor.numel() * sizeof(double), h);
  }
  return h;
}

void init_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.raw()) v = rng.uniform(lo, hi);
}

void init_normal(Tensor& t, Rng& rng, double stddev) {
  for (auto& v : t.raw()) v = stddev * rng.normal();
}

void init_glorot(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  init_uniform(t, rng, -bound, bound);
}

}  // namespace audiolab::diff
