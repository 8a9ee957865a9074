// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace audiolab::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap cmap(const detail::Node* n, std::size_t r, std::size_t c) {
  return ConstMatMap(n->value.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
ConstMatMap cmap_grad(const detail::Node* n, std::size_t r, std::size_t c) {
  return ConstMatMap(n->grad.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MatMap gmap(detail::Node* n, std::size_t r, std::size_t c) {
  return MatMap(n->grad.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data())
    if (!std::isfinite(v))
      throw NumericError(std::string(op) + ": non-finite value in output " +
                         shape_str(t.shape()));
}

Tensor new_op(const char* op, Shape shape, std::vector<detail::NodePtr> parents) {
  auto n = std::make_shared<detail::Node>();
  n->op = op;
  n->value.assign(shape_numel(shape), 0.0);
  n->shape = std::move(shape);
  if (grad_enabled())
    for (const auto& p : parents)
      if (p->requires_grad) { n->requires_grad = true; break; }
  n->parents = std::move(parents);
  return Tensor(std::move(n));
}

void finish(Tensor& t, const char* op, std::function<void(detail::Node&)> bw) {
  if (debug_checks()) check_finite(t, op);
  if (t.node()->requires_grad) t.node()->backward_fn = std::move(bw);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void require_matrix(const char* op, const Tensor& x) {
  if (x.shape().size() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
}

Tensor unary_ew(const char* op, const Tensor& x, double (*f)(double),
                double (*df_from_xy)(double x, double y)) {
  Tensor out = new_op(op, x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = f(xv[i]);
  detail::Node* px = x.node();
  finish(out, op, [px, df_from_xy](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.value.size(); ++i)
      px->grad[i] += n.grad[i] * df_from_xy(px->value[i], n.value[i]);
  });
  return out;
}

}  // namespace

// ---------------- elementwise ----------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = new_op("add", a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  detail::Node *pa = a.node(), *pb = b.node();
  finish(out, "add", [pa, pb](detail::Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = new_op("sub", a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] - bv[i];
  detail::Node *pa = a.node(), *pb = b.node();
  finish(out, "sub", [pa, pb](detail::Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = new_op("mul", a.shape(), {a.node_ptr(), b.node_ptr()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  detail::Node *pa = a.node(), *pb = b.node();
  finish(out, "mul", [pa, pb](detail::Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
    }
  });
  return out;
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double c) {
  Tensor out = new_op("scale", x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = c * xv[i];
  detail::Node* px = x.node();
  finish(out, "scale", [px, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += c * n.grad[i];
  });
  return out;
}

Tensor add_const(const Tensor& x, double c) {
  Tensor out = new_op("add_const", x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] + c;
  detail::Node* px = x.node();
  finish(out, "add_const", [px](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
  });
  return out;
}

Tensor one_minus(const Tensor& x) {
  Tensor out = new_op("one_minus", x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = 1.0 - xv[i];
  detail::Node* px = x.node();
  finish(out, "one_minus", [px](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] -= n.grad[i];
  });
  return out;
}

Tensor relu(const Tensor& x) {
  return unary_ew("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_ew("sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_act(const Tensor& x) {
  return unary_ew("tanh", x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_act(const Tensor& x) {
  return unary_ew("exp", x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log_act(const Tensor& x) {
  return unary_ew("log", x, [](double v) { return std::log(v); },
                  [](double xv, double) { return 1.0 / xv; });
}

Tensor sqrt_act(const Tensor& x) {
  return unary_ew("sqrt", x, [](double v) { return std::sqrt(v); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor softplus(const Tensor& x) {
  return unary_ew("softplus", x,
                  [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); },
                  [](double xv, double) { return 1.0 / (1.0 + std::exp(-xv)); });
}

Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1)
    throw ShapeError("mul_scalar_tensor: scalar operand has shape " + shape_str(s.shape()));
  Tensor out = new_op("mul_scalar_tensor", x.shape(), {x.node_ptr(), s.node_ptr()});
  const double sv = s.node()->value[0];
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = sv * xv[i];
  detail::Node *px = x.node(), *ps = s.node();
  finish(out, "mul_scalar_tensor", [px, ps](detail::Node& n) {
    const double sv = ps->value[0];
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += sv * n.grad[i];
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * px->value[i];
      ps->grad[0] += acc;
    }
  });
  return out;
}

// ---------------- shape ----------------

Tensor reshape(const Tensor& x, Shape s) {
  if (shape_numel(s) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(s));
  Tensor out = new_op("reshape", std::move(s), {x.node_ptr()});
  out.node()->value = x.node()->value;
  detail::Node* px = x.node();
  finish(out, "reshape", [px](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
  });
  return out;
}

Tensor transpose2d(const Tensor& x) {
  require_matrix("transpose", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("transpose", {c, r}, {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) yv[j * r + i] = xv[i * c + j];
  detail::Node* px = x.node();
  finish(out, "transpose", [px, r, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += n.grad[j * r + i];
  });
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t nrows) {
  require_matrix("slice_rows", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (r0 + nrows > r)
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," +
                     std::to_string(r0 + nrows) + ") exceeds rows of " + shape_str(x.shape()));
  Tensor out = new_op("slice_rows", {nrows, c}, {x.node_ptr()});
  std::copy_n(x.node()->value.begin() + static_cast<std::ptrdiff_t>(r0 * c), nrows * c,
              out.node()->value.begin());
  detail::Node* px = x.node();
  finish(out, "slice_rows", [px, r0, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[r0 * c + i] += n.grad[i];
  });
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t ncols) {
  require_matrix("slice_cols", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (c0 + ncols > c)
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," +
                     std::to_string(c0 + ncols) + ") exceeds cols of " + shape_str(x.shape()));
  Tensor out = new_op("slice_cols", {r, ncols}, {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(i * c + c0), ncols,
                yv.begin() + static_cast<std::ptrdiff_t>(i * ncols));
  detail::Node* px = x.node();
  finish(out, "slice_cols", [px, c0, c, ncols, r](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < ncols; ++j) px->grad[i * c + c0 + j] += n.grad[i * ncols + j];
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: empty input list");
  const std::size_t c = xs[0].dim(1);
  std::size_t rows = 0;
  std::vector<detail::NodePtr> parents;
  for (const auto& x : xs) {
    require_matrix("concat_rows", x);
    if (x.dim(1) != c)
      throw ShapeError("concat_rows: column mismatch " + shape_str(x.shape()) + " vs " +
                       std::to_string(c) + " cols");
    rows += x.dim(0);
    parents.push_back(x.node_ptr());
  }
  Tensor out = new_op("concat_rows", {rows, c}, std::move(parents));
  auto& yv = out.node()->value;
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x.data().begin(), x.data().end(), yv.begin() + static_cast<std::ptrdiff_t>(off));
    off += x.numel();
  }
  finish(out, "concat_rows", [](detail::Node& n) {
    std::size_t off = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += n.grad[off + i];
      }
      off += p->value.size();
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: empty input list");
  const std::size_t r = xs[0].dim(0);
  std::size_t cols = 0;
  std::vector<detail::NodePtr> parents;
  for (const auto& x : xs) {
    require_matrix("concat_cols", x);
    if (x.dim(0) != r)
      throw ShapeError("concat_cols: row mismatch " + shape_str(x.shape()) + " vs " +
                       std::to_string(r) + " rows");
    cols += x.dim(1);
    parents.push_back(x.node_ptr());
  }
  Tensor out = new_op("concat_cols", {r, cols}, std::move(parents));
  auto& yv = out.node()->value;
  std::size_t coff = 0;
  for (const auto& x : xs) {
    const std::size_t xc = x.dim(1);
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i * xc), xc,
                  yv.begin() + static_cast<std::ptrdiff_t>(i * cols + coff));
    coff += xc;
  }
  finish(out, "concat_cols", [r, cols](detail::Node& n) {
    std::size_t coff = 0;
    for (auto& p : n.parents) {
      const std::size_t xc = p->shape[1];
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < xc; ++j) p->grad[i * xc + j] += n.grad[i * cols + coff + j];
      }
      coff += xc;
    }
  });
  return out;
}

Tensor repeat_row(const Tensor& v, std::size_t rows) {
  if (v.shape().size() != 1)
    throw ShapeError("repeat_row: expected a vector, got " + shape_str(v.shape()));
  const std::size_t c = v.dim(0);
  Tensor out = new_op("repeat_row", {rows, c}, {v.node_ptr()});
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < rows; ++i)
    std::copy(v.data().begin(), v.data().end(), yv.begin() + static_cast<std::ptrdiff_t>(i * c));
  detail::Node* pv = v.node();
  finish(out, "repeat_row", [pv, rows, c](detail::Node& n) {
    if (!pv->requires_grad) return;
    pv->ensure_grad();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < c; ++j) pv->grad[j] += n.grad[i * c + j];
  });
  return out;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& index) {
  require_matrix("permute_rows", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  for (auto i : index)
    if (i >= r) throw ShapeError("permute_rows: index " + std::to_string(i) + " out of range");
  Tensor out = new_op("permute_rows", {index.size(), c}, {x.node_ptr()});
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(index[i] * c), c,
                yv.begin() + static_cast<std::ptrdiff_t>(i * c));
  detail::Node* px = x.node();
  finish(out, "permute_rows", [px, index, c](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) px->grad[index[i] * c + j] += nd.grad[i * c + j];
  });
  return out;
}

// ---------------- linear algebra ----------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ, lhs " + shape_str(a.shape()) + " rhs " +
                     shape_str(b.shape()));
  Tensor out = new_op("matmul", {m, n}, {a.node_ptr(), b.node_ptr()});
  MatMap(out.node()->value.data(), m, n).noalias() = cmap(a.node(), m, k) * cmap(b.node(), k, n);
  detail::Node *pa = a.node(), *pb = b.node();
  finish(out, "matmul", [pa, pb, m, k, n](detail::Node& nd) {
    auto dy = cmap_grad(&nd, m, n);
    if (pa->requires_grad) {
      pa->ensure_grad();
      gmap(pa, m, k).noalias() += dy * cmap(pb, k, n).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      gmap(pb, k, n).noalias() += cmap(pa, m, k).transpose() * dy;
    }
  });
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  require_matrix("add_rowvec", x);
  if (v.shape().size() != 1 || v.dim(0) != x.dim(1))
    throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) + " does not match cols of " +
                     shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("add_rowvec", x.shape(), {x.node_ptr(), v.node_ptr()});
  const auto& xv = x.node()->value;
  const auto& vv = v.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) yv[i * c + j] = xv[i * c + j] + vv[j];
  detail::Node *px = x.node(), *pv = v.node();
  finish(out, "add_rowvec", [px, pv, r, c](detail::Node& n) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) pv->grad[j] += n.grad[i * c + j];
    }
  });
  return out;
}

Tensor div_rows(const Tensor& x, const Tensor& r) {
  require_matrix("div_rows", x);
  if (r.shape().size() != 1 || r.dim(0) != x.dim(0))
    throw ShapeError("div_rows: divisor " + shape_str(r.shape()) + " does not match rows of " +
                     shape_str(x.shape()));
  const std::size_t rows = x.dim(0), c = x.dim(1);
  Tensor out = new_op("div_rows", x.shape(), {x.node_ptr(), r.node_ptr()});
  const auto& xv = x.node()->value;
  const auto& rv = r.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) yv[i * c + j] = xv[i * c + j] / rv[i];
  detail::Node *px = x.node(), *pr = r.node();
  finish(out, "div_rows", [px, pr, rows, c](detail::Node& n) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += n.grad[i * c + j] / pr->value[i];
    }
    if (pr->requires_grad) {
      pr->ensure_grad();
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += n.grad[i * c + j] * n.value[i * c + j];
        pr->grad[i] -= acc / pr->value[i];
      }
    }
  });
  return out;
}

// ---------------- reductions ----------------

Tensor row_sum(const Tensor& x) {
  require_matrix("row_sum", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("row_sum", {r}, {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += xv[i * c + j];
    yv[i] = acc;
  }
  detail::Node* px = x.node();
  finish(out, "row_sum", [px, r, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += n.grad[i];
  });
  return out;
}

Tensor col_sum(const Tensor& x) {
  require_matrix("col_sum", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("col_sum", {c}, {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) yv[j] += xv[i * c + j];
  detail::Node* px = x.node();
  finish(out, "col_sum", [px, r, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += n.grad[j];
  });
  return out;
}

Tensor col_mean(const Tensor& x) {
  return scale(col_sum(x), 1.0 / static_cast<double>(x.dim(0)));
}

Tensor sum_all(const Tensor& x) {
  Tensor out = new_op("sum_all", {1}, {x.node_ptr()});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.node()->value[0] = acc;
  detail::Node* px = x.node();
  finish(out, "sum_all", [px](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += n.grad[0];
  });
  return out;
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------- softmax family ----------------

Tensor softmax_rows(const Tensor& x) {
  require_matrix("softmax", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("softmax", x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yv[i * c + j] = std::exp(xv[i * c + j] - mx);
      z += yv[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) yv[i * c + j] /= z;
  }
  detail::Node* px = x.node();
  finish(out, "softmax", [px, r, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += n.grad[i * c + j] * n.value[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        px->grad[i * c + j] += n.value[i * c + j] * (n.grad[i * c + j] - dot);
    }
  });
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  require_matrix("log_softmax", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = new_op("log_softmax", x.shape(), {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(xv[i * c + j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) yv[i * c + j] = xv[i * c + j] - lz;
  }
  detail::Node* px = x.node();
  finish(out, "log_softmax", [px, r, c](detail::Node& n) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) gsum += n.grad[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        px->grad[i * c + j] += n.grad[i * c + j] - std::exp(n.value[i * c + j]) * gsum;
    }
  });
  return out;
}

// ---------------- gather ----------------

Tensor gather_diag(const Tensor& x) {
  require_matrix("gather_diag", x);
  if (x.dim(0) != x.dim(1))
    throw ShapeError("gather_diag: matrix is not square: " + shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  Tensor out = new_op("gather_diag", {n}, {x.node_ptr()});
  for (std::size_t i = 0; i < n; ++i) out.node()->value[i] = x.data()[i * n + i];
  detail::Node* px = x.node();
  finish(out, "gather_diag", [px, n](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) px->grad[i * n + i] += nd.grad[i];
  });
  return out;
}

Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& ids) {
  require_matrix("gather_cols", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (ids.size() != r)
    throw ShapeError("gather_cols: need one index per row (" + std::to_string(r) + "), got " +
                     std::to_string(ids.size()));
  for (auto id : ids)
    if (id >= c) throw ShapeError("gather_cols: index " + std::to_string(id) + " out of range");
  Tensor out = new_op("gather_cols", {r}, {x.node_ptr()});
  for (std::size_t i = 0; i < r; ++i) out.node()->value[i] = x.data()[i * c + ids[i]];
  detail::Node* px = x.node();
  finish(out, "gather_cols", [px, ids, c](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i) px->grad[i * c + ids[i]] += nd.grad[i];
  });
  return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
  require_matrix("embedding", table);
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (auto id : ids)
    if (id >= v)
      throw ShapeError("embedding: index " + std::to_string(id) + " out of range for table " +
                       shape_str(table.shape()));
  Tensor out = new_op("embedding", {ids.size(), d}, {table.node_ptr()});
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                yv.begin() + static_cast<std::ptrdiff_t>(i * d));
  detail::Node* pt = table.node();
  finish(out, "embedding", [pt, ids, d](detail::Node& nd) {
    if (!pt->requires_grad) return;
    pt->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) pt->grad[ids[i] * d + j] += nd.grad[i * d + j];
  });
  return out;
}

// ---------------- neural-net layers ----------------

namespace {

void require_nchw(const char* op, const Tensor& x) {
  if (x.shape().size() != 4)
    throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(x.shape()));
}

// col buffer layout: [C*kh*kw, H*W]
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, double* col) {
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        double* dst = col + row * h * w;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(ki) - ph;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(kj) - pw;
        for (std::size_t oi = 0; oi < h; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi) + di;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) {
            std::fill_n(dst + oi * w, w, 0.0);
            continue;
          }
          const double* src = x + (ci * h + static_cast<std::size_t>(ii)) * w;
          for (std::size_t oj = 0; oj < w; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj) + dj;
            dst[oi * w + oj] =
                (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[jj];
          }
        }
      }
}

void col2im_accum(const double* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
                  std::size_t kw, double* dx) {
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        const double* src = col + row * h * w;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(ki) - ph;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(kj) - pw;
        for (std::size_t oi = 0; oi < h; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi) + di;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = dx + (ci * h + static_cast<std::size_t>(ii)) * w;
          for (std::size_t oj = 0; oj < w; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj) + dj;
            if (jj >= 0 && jj < static_cast<std::ptrdiff_t>(w))
              dst[jj] += src[oi * w + oj];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_nchw("conv2d", x);
  if (w.shape().size() != 4)
    throw ShapeError("conv2d: weight must be [Co,Ci,kh,kw], got " + shape_str(w.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const std::size_t co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (ci != c)
    throw ShapeError("conv2d: input channels " + std::to_string(c) + " do not match weight " +
                     shape_str(w.shape()));
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd, got " + shape_str(w.shape()));
  if (b.shape().size() != 1 || b.dim(0) != co)
    throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " does not match out channels " +
                     std::to_string(co));

  Tensor out = new_op("conv2d", {n, co, h, ww}, {x.node_ptr(), w.node_ptr(), b.node_ptr()});
  const std::size_t k = c * kh * kw, hw = h * ww;
  std::vector<double> col(k * hw);
  auto wmat = cmap(w.node(), co, k);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.data().data() + i * c * hw, c, h, ww, kh, kw, col.data());
    MatMap y(out.node()->value.data() + i * co * hw, co, hw);
    y.noalias() = wmat * ConstMatMap(col.data(), k, hw);
    for (std::size_t oc = 0; oc < co; ++oc) y.row(static_cast<Eigen::Index>(oc)).array() += b.data()[oc];
  }

  detail::Node *px = x.node(), *pw = w.node(), *pb = b.node();
  finish(out, "conv2d", [px, pw, pb, n, c, h, ww, co, kh, kw](detail::Node& nd) {
    const std::size_t k = c * kh * kw, hw = h * ww;
    std::vector<double> col(k * hw);
    if (pw->requires_grad || pb->requires_grad) {
      if (pw->requires_grad) pw->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        ConstMatMap dy(nd.grad.data() + i * co * hw, co, hw);
        if (pw->requires_grad) {
          im2col(px->value.data() + i * c * hw, c, h, ww, kh, kw, col.data());
          gmap(pw, co, k).noalias() += dy * ConstMatMap(col.data(), k, hw).transpose();
        }
        if (pb->requires_grad)
          for (std::size_t oc = 0; oc < co; ++oc)
            pb->grad[oc] += dy.row(static_cast<Eigen::Index>(oc)).sum();
      }
    }
    if (px->requires_grad) {
      px->ensure_grad();
      auto wmat = cmap(pw, co, k);
      std::vector<double> dcol(k * hw);
      for (std::size_t i = 0; i < n; ++i) {
        ConstMatMap dy(nd.grad.data() + i * co * hw, co, hw);
        MatMap(dcol.data(), k, hw).noalias() = wmat.transpose() * dy;
        col2im_accum(dcol.data(), c, h, ww, kh, kw, px->grad.data() + i * c * hw);
      }
    }
  });
  return out;
}

Tensor maxpool2x2(const Tensor& x) {
  require_nchw("maxpool2x2", x);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0)
    throw ShapeError("maxpool2x2: input " + shape_str(x.shape()) + " too small to pool");
  Tensor out = new_op("maxpool2x2", {n, c, oh, ow}, {x.node_ptr()});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(n * c * oh * ow);
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  std::size_t oidx = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* plane = xv.data() + (i * c + ci) * h * w;
      for (std::size_t oi = 0; oi < oh; ++oi)
        for (std::size_t oj = 0; oj < ow; ++oj, ++oidx) {
          // window scanned in row-major order; strict > keeps the first max
          const std::size_t base = 2 * oi * w + 2 * oj;
          double best = plane[base];
          std::uint32_t bi = static_cast<std::uint32_t>(base);
          const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
          for (std::size_t t = 0; t < 3; ++t)
            if (plane[cand[t]] > best) {
              best = plane[cand[t]];
              bi = static_cast<std::uint32_t>(cand[t]);
            }
          yv[oidx] = best;
          (*argmax)[oidx] = static_cast<std::uint32_t>((i * c + ci) * h * w) + bi;
        }
    }
  detail::Node* px = x.node();
  finish(out, "maxpool2x2", [px, argmax](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < nd.grad.size(); ++i) px->grad[(*argmax)[i]] += nd.grad[i];
  });
  return out;
}

Tensor mean_hw(const Tensor& x) {
  require_nchw("mean_hw", x);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out = new_op("mean_hw", {n, c}, {x.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < hw; ++j) acc += xv[i * hw + j];
    yv[i] = acc / static_cast<double>(hw);
  }
  detail::Node* px = x.node();
  finish(out, "mean_hw", [px, hw](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < nd.grad.size(); ++i)
      for (std::size_t j = 0; j < hw; ++j) px->grad[i * hw + j] += nd.grad[i] * inv;
  });
  return out;
}

Tensor max_hw(const Tensor& x) {
  require_nchw("max_hw", x);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out = new_op("max_hw", {n, c}, {x.node_ptr()});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(n * c);
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < n * c; ++i) {
    double best = xv[i * hw];
    std::uint32_t bj = 0;
    for (std::size_t j = 1; j < hw; ++j)
      if (xv[i * hw + j] > best) {
        best = xv[i * hw + j];
        bj = static_cast<std::uint32_t>(j);
      }
    yv[i] = best;
    (*argmax)[i] = static_cast<std::uint32_t>(i * hw) + bj;
  }
  detail::Node* px = x.node();
  finish(out, "max_hw", [px, argmax](detail::Node& nd) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < nd.grad.size(); ++i) px->grad[(*argmax)[i]] += nd.grad[i];
  });
  return out;
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor running_mean, Tensor running_var, bool training, double momentum,
                    double eps) {
  require_nchw("batch_norm", x);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto check_c = [&](const char* what, const Tensor& t) {
    if (t.shape().size() != 1 || t.dim(0) != c)
      throw ShapeError(std::string("batch_norm: ") + what + " " + shape_str(t.shape()) +
                       " does not match channels " + std::to_string(c));
  };
  check_c("gamma", gamma);
  check_c("beta", beta);
  check_c("running_mean", running_mean);
  check_c("running_var", running_var);

  const std::size_t hw = h * w, m = n * hw;
  auto mean = std::make_shared<std::vector<double>>(c, 0.0);
  auto invstd = std::make_shared<std::vector<double>>(c, 0.0);
  if (training) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * c + ci) * hw;
        for (std::size_t j = 0; j < hw; ++j) mu += p[j];
      }
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * c + ci) * hw;
        for (std::size_t j = 0; j < hw; ++j) var += (p[j] - mu) * (p[j] - mu);
      }
      var /= static_cast<double>(m);
      (*mean)[ci] = mu;
      (*invstd)[ci] = 1.0 / std::sqrt(var + eps);
      running_mean.raw()[ci] = momentum * running_mean.raw()[ci] + (1.0 - momentum) * mu;
      running_var.raw()[ci] = momentum * running_var.raw()[ci] + (1.0 - momentum) * var;
    }
  } else {
    for (std::size_t ci = 0; ci < c; ++ci) {
      (*mean)[ci] = running_mean.data()[ci];
      (*invstd)[ci] = 1.0 / std::sqrt(running_var.data()[ci] + eps);
    }
  }

  Tensor out = new_op("batch_norm", x.shape(), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()});
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double mu = (*mean)[ci], is = (*invstd)[ci];
      const double g = gamma.data()[ci], bb = beta.data()[ci];
      const std::size_t off = (i * c + ci) * hw;
      for (std::size_t j = 0; j < hw; ++j) yv[off + j] = g * (xv[off + j] - mu) * is + bb;
    }

  detail::Node *px = x.node(), *pg = gamma.node(), *pb = beta.node();
  finish(out, "batch_norm", [px, pg, pb, mean, invstd, n, c, hw, training](detail::Node& nd) {
    const double mm = static_cast<double>(n * hw);
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double mu = (*mean)[ci], is = (*invstd)[ci], g = pg->value[ci];
      double s1 = 0.0, s2 = 0.0;  // sum dy, sum dy*xhat
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ci) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double dy = nd.grad[off + j];
          s1 += dy;
          s2 += dy * (px->value[off + j] - mu) * is;
        }
      }
      if (pg->requires_grad) {
        pg->ensure_grad();
        pg->grad[ci] += s2;
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        pb->grad[ci] += s1;
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t off = (i * c + ci) * hw;
          for (std::size_t j = 0; j < hw; ++j) {
            const double dy = nd.grad[off + j];
            const double xh = (px->value[off + j] - mu) * is;
            px->grad[off + j] +=
                training ? g * is * (dy - s1 / mm - xh * s2 / mm) : g * is * dy;
          }
        }
      }
    }
  });
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix("layer_norm", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (gamma.shape().size() != 1 || gamma.dim(0) != c || beta.shape().size() != 1 ||
      beta.dim(0) != c)
    throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
                     shape_str(beta.shape()) + " do not match cols of " + shape_str(x.shape()));
  Tensor out = new_op("layer_norm", x.shape(), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()});
  auto mean = std::make_shared<std::vector<double>>(r);
  auto invstd = std::make_shared<std::vector<double>>(r);
  const auto& xv = x.node()->value;
  auto& yv = out.node()->value;
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv[i * c + j] - mu) * (xv[i * c + j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*mean)[i] = mu;
    (*invstd)[i] = is;
    for (std::size_t j = 0; j < c; ++j)
      yv[i * c + j] = gamma.data()[j] * (xv[i * c + j] - mu) * is + beta.data()[j];
  }
  detail::Node *px = x.node(), *pg = gamma.node(), *pb = beta.node();
  finish(out, "layer_norm", [px, pg, pb, mean, invstd, r, c](detail::Node& nd) {
    for (std::size_t i = 0; i < r; ++i) {
      const double mu = (*mean)[i], is = (*invstd)[i];
      double s1 = 0.0, s2 = 0.0;  // sums of g=dy*gamma and g*xhat
      for (std::size_t j = 0; j < c; ++j) {
        const double xh = (px->value[i * c + j] - mu) * is;
        const double g = nd.grad[i * c + j] * pg->value[j];
        s1 += g;
        s2 += g * xh;
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (std::size_t j = 0; j < c; ++j) {
          const double xh = (px->value[i * c + j] - mu) * is;
          const double g = nd.grad[i * c + j] * pg->value[j];
          px->grad[i * c + j] +=
              is * (g - s1 / static_cast<double>(c) - xh * s2 / static_cast<double>(c));
        }
      }
      if (pg->requires_grad || pb->requires_grad) {
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t j = 0; j < c; ++j) {
          const double xh = (px->value[i * c + j] - mu) * is;
          if (pg->requires_grad) pg->grad[j] += nd.grad[i * c + j] * xh;
          if (pb->requires_grad) pb->grad[j] += nd.grad[i * c + j];
        }
      }
    }
  });
  return out;
}

}  // namespace audiolab::diff
