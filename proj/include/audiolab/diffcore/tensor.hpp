// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "audiolab/common.hpp"

namespace audiolab::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily during backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense 64-bit tensor participating in reverse-mode differentiation.
// Value semantics on the handle; the underlying node is shared, so copies
// alias the same data. Values are immutable once the tensor has entered a
// graph; raw() is for leaf initialization and optimizer updates only.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> raw() { return node_->value; }
  double item() const;

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const double> grad() const;
  std::span<double> grad_raw();
  void zero_grad() { node_->grad.clear(); }

  // Reverse-mode sweep from a scalar root. Accumulates into the grad buffer
  // of every reachable tensor with requires_grad.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  detail::NodePtr node_ptr() const { return node_; }

private:
  detail::NodePtr node_;
};

// When enabled, every op scans its output for NaN/Inf and throws NumericError.
void set_debug_checks(bool on);
bool debug_checks();

// Gradient recording switch. While disabled, ops produce constant outputs
// with no backward closures (inference mode).
bool grad_enabled();

class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

}  // namespace audiolab::diff
