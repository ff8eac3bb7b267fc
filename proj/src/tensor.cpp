// tensor.cpp - autodiff primitives: eager forward values, recorded backprop.
#include "jssm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#ifdef JSSM_USE_OPENBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
namespace {
// Threaded GEMM reorders summation; one thread keeps results bit-reproducible.
struct BlasSingleThread {
  BlasSingleThread() { openblas_set_num_threads(1); }
} blas_single_thread;
}  // namespace
#endif

namespace jssm {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace {

using detail::TensorNode;

void check_shape_positive(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

Tensor make_leaf(Shape shape, std::vector<double> value, bool requires_grad) {
  check_shape_positive(shape);
  if (shape_size(shape) != value.size()) {
    throw ShapeError("data length " + std::to_string(value.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor make_op(Shape shape, std::vector<double> value, const char* name,
               std::initializer_list<Tensor> inputs, std::function<void(TensorNode&)> bp) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = name;
  bool rg = false;
  for (const Tensor& t : inputs) rg = rg || t.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) n->inputs.push_back(t.handle());
    n->backprop = std::move(bp);
  }
  return Tensor(std::move(n));
}

// Variant for ops over a dynamic list of inputs (stack/concat).
Tensor make_op_n(Shape shape, std::vector<double> value, const char* name,
                 const std::vector<Tensor>& inputs, std::function<void(TensorNode&)> bp) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = name;
  bool rg = false;
  for (const Tensor& t : inputs) rg = rg || t.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) n->inputs.push_back(t.handle());
    n->backprop = std::move(bp);
  }
  return Tensor(std::move(n));
}

void require_defined(const Tensor& t, const char* who) {
  if (!t.defined()) throw ContractError(std::string(who) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// C (m x n) += alpha * A (m x k, optionally transposed) * B (k x n, optionally
// transposed); row-major with tight leading dimensions.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
          const double* b, double beta, double* c) {
#ifdef JSSM_USE_OPENBLAS
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
#else
  if (beta == 0.0) {
    std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  } else if (beta != 1.0) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) c[i] *= beta;
  }
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = alpha * (trans_a ? a[static_cast<std::size_t>(p) * m + i]
                                         : a[static_cast<std::size_t>(i) * k + p]);
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + static_cast<std::size_t>(p) * n;
      double* crow = c + static_cast<std::size_t>(i) * n;
      if (trans_b) {
        for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<std::size_t>(j) * k + p];
      } else {
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
#endif
}

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x * 0.70710678118654752440)); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) * 0.39894228040143267794; }

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_size(shape), 0.0);
  return make_leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_size(shape), value);
  return make_leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return make_leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_leaf(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.gaussian() * stddev;
  return make_leaf(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "Tensor::shape");
  return node_->shape;
}

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ContractError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                        shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const {
  require_defined(*this, "Tensor::size");
  return node_->value.size();
}

bool Tensor::requires_grad() const {
  require_defined(*this, "Tensor::requires_grad");
  return node_->requires_grad;
}

std::span<const double> Tensor::data() const {
  require_defined(*this, "Tensor::data");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "Tensor::mutable_data");
  return node_->value;
}

bool Tensor::grad_allocated() const {
  require_defined(*this, "Tensor::grad_allocated");
  return !node_->grad.empty();
}

std::span<const double> Tensor::grad() const {
  require_defined(*this, "Tensor::grad");
  if (!node_->requires_grad) throw ContractError("Tensor::grad: tensor does not require gradients");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "Tensor::zero_grad");
  node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
  require_defined(*this, "Tensor::item");
  if (node_->value.size() != 1) {
    throw ContractError("Tensor::item: tensor " + shape_str(node_->shape) + " is not scalar");
  }
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) throw ContractError("Tensor::at: index rank mismatch");
  std::size_t off = 0;
  int axis = 0;
  for (int i : idx) {
    if (i < 0 || i >= s[axis]) throw ContractError("Tensor::at: index out of range");
    off = off * static_cast<std::size_t>(s[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return node_->value[off];
}

// ---- Graph ------------------------------------------------------------------

Graph Graph::trace(const Tensor& output) {
  require_defined(output, "Graph::trace");
  Graph g;
  g.root_ = output.handle();
  std::unordered_set<TensorNode*> seen;
  // Iterative post-order: inputs land in the order before their consumers.
  std::vector<std::pair<TensorNode*, bool>> stack{{output.node(), false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      g.order_.push_back(n);
      continue;
    }
    if (seen.count(n)) continue;
    seen.insert(n);
    stack.push_back({n, true});
    for (const auto& in : n->inputs) stack.push_back({in.get(), false});
  }
  return g;
}

bool Graph::topologically_consistent() const {
  std::unordered_set<const TensorNode*> before;
  for (const TensorNode* n : order_) {
    for (const auto& in : n->inputs) {
      if (!before.count(in.get())) return false;
    }
    before.insert(n);
  }
  return true;
}

void Graph::run_backward() {
  if (order_.empty()) return;
  TensorNode* root = order_.back();
  if (root->value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(root->shape));
  }
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  Graph::trace(loss).run_backward();
}

// ---- elementwise arithmetic ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op(a.shape(), std::move(v), "add", {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) an->accumulate_grad(self.grad.data(), self.grad.size());
    if (bn->requires_grad) bn->accumulate_grad(self.grad.data(), self.grad.size());
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op(a.shape(), std::move(v), "sub", {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) an->accumulate_grad(self.grad.data(), self.grad.size());
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op(a.shape(), std::move(v), "mul", {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  require_defined(a, "scale");
  std::vector<double> v(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
  TensorNode* an = a.node();
  return make_op(a.shape(), std::move(v), "scale", {a}, [an, c](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  require_defined(a, "mul_scalar");
  require_defined(s, "mul_scalar");
  if (s.size() != 1) throw ShapeError("mul_scalar: multiplier must be scalar, got " + shape_str(s.shape()));
  const double sv = s.data()[0];
  std::vector<double> v(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * sv;
  TensorNode* an = a.node();
  TensorNode* sn = s.node();
  return make_op(a.shape(), std::move(v), "mul_scalar", {a, s}, [an, sn](TensorNode& self) {
    const double sval = sn->value[0];
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * sval;
    }
    if (sn->requires_grad) {
      sn->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * an->value[i];
      sn->grad[0] += acc;
    }
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_defined(m, "add_rowvec");
  require_defined(v, "add_rowvec");
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) {
    throw ShapeError("add_rowvec: need (r,c) matrix and (c) vector, got " + shape_str(m.shape()) +
                     " and " + shape_str(v.shape()));
  }
  const int r = m.dim(0), c = m.dim(1);
  std::vector<double> out(m.size());
  const auto mv = m.data(), vv = v.data();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + vv[j];
  }
  TensorNode* mn = m.node();
  TensorNode* vn = v.node();
  return make_op(m.shape(), std::move(out), "add_rowvec", {m, v}, [mn, vn, r, c](TensorNode& self) {
    if (mn->requires_grad) mn->accumulate_grad(self.grad.data(), self.grad.size());
    if (vn->requires_grad) {
      vn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) vn->grad[j] += self.grad[i * c + j];
      }
    }
  });
}

// ---- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: need rank-2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  gemm(false, false, m, n, k, 1.0, a.data().data(), b.data().data(), 0.0, out.data());
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op({m, n}, std::move(out), "matmul", {a, b}, [an, bn, m, k, n](TensorNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      // dA += dC * B^T
      gemm(false, true, m, k, n, 1.0, self.grad.data(), bn->value.data(), 1.0, an->grad.data());
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      // dB += A^T * dC
      gemm(true, false, k, n, m, 1.0, an->value.data(), self.grad.data(), 1.0, bn->grad.data());
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.rank() != 2) throw ShapeError("transpose: need rank-2 operand, got " + shape_str(a.shape()));
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.size());
  const auto av = a.data();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = av[i * c + j];
  }
  TensorNode* an = a.node();
  return make_op({c, r}, std::move(out), "transpose", {a}, [an, r, c](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int j = 0; j < c; ++j) {
      for (int i = 0; i < r; ++i) an->grad[i * c + j] += self.grad[static_cast<std::size_t>(j) * r + i];
    }
  });
}

// ---- structural ops -----------------------------------------------------------

Tensor row(const Tensor& m, int i) {
  require_defined(m, "row");
  if (m.rank() != 2) throw ShapeError("row: need rank-2 operand, got " + shape_str(m.shape()));
  const int r = m.dim(0), c = m.dim(1);
  if (i < 0 || i >= r) throw ContractError("row: index " + std::to_string(i) + " out of range");
  std::vector<double> out(m.data().begin() + static_cast<std::size_t>(i) * c,
                          m.data().begin() + static_cast<std::size_t>(i + 1) * c);
  TensorNode* mn = m.node();
  return make_op({c}, std::move(out), "row", {m}, [mn, i, c](TensorNode& self) {
    if (!mn->requires_grad) return;
    mn->ensure_grad();
    for (int j = 0; j < c; ++j) mn->grad[static_cast<std::size_t>(i) * c + j] += self.grad[j];
  });
}

Tensor slice_rows(const Tensor& m, int start, int count) {
  require_defined(m, "slice_rows");
  if (m.rank() != 2) throw ShapeError("slice_rows: need rank-2 operand, got " + shape_str(m.shape()));
  const int r = m.dim(0), c = m.dim(1);
  if (start < 0 || count <= 0 || start + count > r) {
    throw ContractError("slice_rows: range [" + std::to_string(start) + "," +
                        std::to_string(start + count) + ") out of bounds for " + shape_str(m.shape()));
  }
  std::vector<double> out(m.data().begin() + static_cast<std::size_t>(start) * c,
                          m.data().begin() + static_cast<std::size_t>(start + count) * c);
  TensorNode* mn = m.node();
  return make_op({count, c}, std::move(out), "slice_rows", {m}, [mn, start, count, c](TensorNode& self) {
    if (!mn->requires_grad) return;
    mn->ensure_grad();
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * c; ++i) {
      mn->grad[static_cast<std::size_t>(start) * c + i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& m, int start, int count) {
  require_defined(m, "slice_cols");
  if (m.rank() != 2) throw ShapeError("slice_cols: need rank-2 operand, got " + shape_str(m.shape()));
  const int r = m.dim(0), c = m.dim(1);
  if (start < 0 || count <= 0 || start + count > c) {
    throw ContractError("slice_cols: range [" + std::to_string(start) + "," +
                        std::to_string(start + count) + ") out of bounds for " + shape_str(m.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(r) * count);
  const auto mv = m.data();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < count; ++j) out[i * count + j] = mv[static_cast<std::size_t>(i) * c + start + j];
  }
  TensorNode* mn = m.node();
  return make_op({r, count}, std::move(out), "slice_cols", {m}, [mn, start, count, r, c](TensorNode& self) {
    if (!mn->requires_grad) return;
    mn->ensure_grad();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < count; ++j) {
        mn->grad[static_cast<std::size_t>(i) * c + start + j] += self.grad[i * count + j];
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const int r = parts[0].dim(0);
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != r) {
      throw ShapeError("concat_cols: row counts disagree: " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  std::vector<double> out(static_cast<std::size_t>(r) * total);
  int off = 0;
  for (const Tensor& p : parts) {
    const int c = p.dim(1);
    const auto pv = p.data();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * total + off + j] = pv[i * c + j];
    }
    off += c;
  }
  std::vector<std::pair<TensorNode*, int>> srcs;
  srcs.reserve(parts.size());
  for (const Tensor& p : parts) srcs.push_back({p.node(), p.dim(1)});
  return make_op_n({r, total}, std::move(out), "concat_cols", parts, [srcs, r, total](TensorNode& self) {
    int off = 0;
    for (auto [pn, c] : srcs) {
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < c; ++j) {
            pn->grad[static_cast<std::size_t>(i) * c + j] +=
                self.grad[static_cast<std::size_t>(i) * total + off + j];
          }
        }
      }
      off += c;
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no inputs");
  const int d = rows[0].dim(0);
  for (const Tensor& t : rows) {
    if (t.rank() != 1 || t.dim(0) != d) {
      throw ShapeError("stack_rows: need equal-length vectors, got " + shape_str(rows[0].shape()) +
                       " vs " + shape_str(t.shape()));
    }
  }
  const int k = static_cast<int>(rows.size());
  std::vector<double> out(static_cast<std::size_t>(k) * d);
  for (int i = 0; i < k; ++i) {
    const auto rv = rows[i].data();
    std::copy(rv.begin(), rv.end(), out.begin() + static_cast<std::size_t>(i) * d);
  }
  std::vector<TensorNode*> srcs;
  srcs.reserve(rows.size());
  for (const Tensor& t : rows) srcs.push_back(t.node());
  return make_op_n({k, d}, std::move(out), "stack_rows", rows, [srcs, d](TensorNode& self) {
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      if (!srcs[i]->requires_grad) continue;
      srcs[i]->accumulate_grad(self.grad.data() + i * d, static_cast<std::size_t>(d));
    }
  });
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("stack_scalars: no inputs");
  const int k = static_cast<int>(xs.size());
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) {
    if (xs[i].size() != 1) {
      throw ShapeError("stack_scalars: element " + std::to_string(i) + " is not scalar: " +
                       shape_str(xs[i].shape()));
    }
    out[i] = xs[i].data()[0];
  }
  std::vector<TensorNode*> srcs;
  srcs.reserve(xs.size());
  for (const Tensor& t : xs) srcs.push_back(t.node());
  return make_op_n({k}, std::move(out), "stack_scalars", xs, [srcs](TensorNode& self) {
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      if (!srcs[i]->requires_grad) continue;
      srcs[i]->ensure_grad();
      srcs[i]->grad[0] += self.grad[i];
    }
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  require_defined(table, "gather_rows");
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: need rank-2 table, got " + shape_str(table.shape()));
  }
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ContractError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                          std::to_string(v) + ")");
    }
  }
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<std::size_t>(n) * d);
  const auto tv = table.data();
  for (int i = 0; i < n; ++i) {
    std::copy(tv.begin() + static_cast<std::size_t>(ids[i]) * d,
              tv.begin() + static_cast<std::size_t>(ids[i] + 1) * d,
              out.begin() + static_cast<std::size_t>(i) * d);
  }
  TensorNode* tn = table.node();
  return make_op({n, d}, std::move(out), "gather_rows", {table}, [tn, ids, d](TensorNode& self) {
    if (!tn->requires_grad) return;
    tn->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int j = 0; j < d; ++j) {
        tn->grad[static_cast<std::size_t>(ids[i]) * d + j] += self.grad[i * d + j];
      }
    }
  });
}

// ---- reductions and losses ------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  TensorNode* an = a.node();
  return make_op({1}, {acc}, "sum", {a}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const double g = self.grad[0];
    for (double& x : an->grad) x += g;
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  const double inv = 1.0 / static_cast<double>(a.size());
  TensorNode* an = a.node();
  return make_op({1}, {acc * inv}, "mean", {a}, [an, inv](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const double g = self.grad[0] * inv;
    for (double& x : an->grad) x += g;
  });
}

Tensor dot(const Tensor& u, const Tensor& v) {
  require_defined(u, "dot");
  require_defined(v, "dot");
  if (u.rank() != 1 || v.rank() != 1 || u.dim(0) != v.dim(0)) {
    throw ShapeError("dot: need equal-length vectors, got " + shape_str(u.shape()) + " and " +
                     shape_str(v.shape()));
  }
  double acc = 0.0;
  const auto uv = u.data(), vv = v.data();
  for (std::size_t i = 0; i < uv.size(); ++i) acc += uv[i] * vv[i];
  TensorNode* un = u.node();
  TensorNode* vn = v.node();
  return make_op({1}, {acc}, "dot", {u, v}, [un, vn](TensorNode& self) {
    const double g = self.grad[0];
    if (un->requires_grad) {
      un->ensure_grad();
      for (std::size_t i = 0; i < un->grad.size(); ++i) un->grad[i] += g * vn->value[i];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      for (std::size_t i = 0; i < vn->grad.size(); ++i) vn->grad[i] += g * un->value[i];
    }
  });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  require_defined(pred, "mse");
  require_defined(target, "mse");
  require_same_shape(pred, target, "mse");
  const auto pv = pred.data(), tv = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(pred.size());
  TensorNode* pn = pred.node();
  TensorNode* tn = target.node();
  return make_op({1}, {acc * inv}, "mse", {pred, target}, [pn, tn, inv](TensorNode& self) {
    const double g = self.grad[0] * 2.0 * inv;
    if (pn->requires_grad) {
      pn->ensure_grad();
      for (std::size_t i = 0; i < pn->grad.size(); ++i) {
        pn->grad[i] += g * (pn->value[i] - tn->value[i]);
      }
    }
    if (tn->requires_grad) {
      tn->ensure_grad();
      for (std::size_t i = 0; i < tn->grad.size(); ++i) {
        tn->grad[i] -= g * (pn->value[i] - tn->value[i]);
      }
    }
  });
}

Tensor cosine(const Tensor& u, const Tensor& v) {
  require_defined(u, "cosine");
  require_defined(v, "cosine");
  if (u.rank() != 1 || v.rank() != 1 || u.dim(0) != v.dim(0)) {
    throw ShapeError("cosine: need equal-length vectors, got " + shape_str(u.shape()) + " and " +
                     shape_str(v.shape()));
  }
  const auto uv = u.data(), vv = v.data();
  double uu = 0.0, vv2 = 0.0, uvdot = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    uu += uv[i] * uv[i];
    vv2 += vv[i] * vv[i];
    uvdot += uv[i] * vv[i];
  }
  if (uu == 0.0 || vv2 == 0.0) throw DegenerateInputError("cosine: zero-norm input vector");
  const double nu = std::sqrt(uu), nv = std::sqrt(vv2);
  const double c = std::clamp(uvdot / (nu * nv), -1.0, 1.0);
  TensorNode* un = u.node();
  TensorNode* vn = v.node();
  return make_op({1}, {c}, "cosine", {u, v}, [un, vn, nu, nv, c](TensorNode& self) {
    const double g = self.grad[0];
    const double inv = 1.0 / (nu * nv);
    if (un->requires_grad) {
      un->ensure_grad();
      const double cu = c / (nu * nu);
      for (std::size_t i = 0; i < un->grad.size(); ++i) {
        un->grad[i] += g * (vn->value[i] * inv - cu * un->value[i]);
      }
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      const double cv = c / (nv * nv);
      for (std::size_t i = 0; i < vn->grad.size(); ++i) {
        vn->grad[i] += g * (un->value[i] * inv - cv * vn->value[i]);
      }
    }
  });
}

// ---- nonlinearities ------------------------------------------------------------

Tensor softmax(const Tensor& a, int axis) {
  require_defined(a, "softmax");
  if (axis < 0 || axis >= a.rank()) {
    throw ContractError("softmax: axis " + std::to_string(axis) + " invalid for " +
                        shape_str(a.shape()));
  }
  const Shape& s = a.shape();
  const int len = s[axis];
  std::size_t inner = 1;
  for (int i = axis + 1; i < a.rank(); ++i) inner *= static_cast<std::size_t>(s[i]);
  const std::size_t outer = a.size() / (inner * static_cast<std::size_t>(len));
  std::vector<double> out(a.size());
  const auto av = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = av[base];
      for (int k = 1; k < len; ++k) mx = std::max(mx, av[base + k * inner]);
      double denom = 0.0;
      for (int k = 0; k < len; ++k) {
        const double e = std::exp(av[base + k * inner] - mx);
        out[base + k * inner] = e;
        denom += e;
      }
      const double invd = 1.0 / denom;
      for (int k = 0; k < len; ++k) out[base + k * inner] *= invd;
    }
  }
  TensorNode* an = a.node();
  return make_op(a.shape(), std::move(out), "softmax", {a},
                 [an, len, inner, outer](TensorNode& self) {
                   if (!an->requires_grad) return;
                   an->ensure_grad();
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t in = 0; in < inner; ++in) {
                       const std::size_t base = o * len * inner + in;
                       double dsum = 0.0;
                       for (int k = 0; k < len; ++k) {
                         dsum += self.grad[base + k * inner] * self.value[base + k * inner];
                       }
                       for (int k = 0; k < len; ++k) {
                         const std::size_t idx = base + k * inner;
                         an->grad[idx] += self.value[idx] * (self.grad[idx] - dsum);
                       }
                     }
                   }
                 });
}

Tensor gelu(const Tensor& a) {
  require_defined(a, "gelu");
  std::vector<double> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * normal_cdf(av[i]);
  TensorNode* an = a.node();
  return make_op(a.shape(), std::move(out), "gelu", {a}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = an->value[i];
      an->grad[i] += self.grad[i] * (normal_cdf(x) + x * normal_pdf(x));
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  const int d = x.dim(x.rank() - 1);
  if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
    throw ShapeError("layer_norm: gain/bias must be (" + std::to_string(d) + ") vectors, got " +
                     shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
  }
  constexpr double kEps = 1e-5;
  const std::size_t rows = x.size() / static_cast<std::size_t>(d);
  std::vector<double> out(x.size());
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double istd = 1.0 / std::sqrt(var + kEps);
    for (int j = 0; j < d; ++j) {
      out[r * d + j] = gv[j] * (xr[j] - mu) * istd + bv[j];
    }
  }
  TensorNode* xn = x.node();
  TensorNode* gn = gain.node();
  TensorNode* bn = bias.node();
  return make_op(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                 [xn, gn, bn, d, rows](TensorNode& self) {
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* xr = xn->value.data() + r * d;
                     const double* gr = self.grad.data() + r * d;
                     double mu = 0.0;
                     for (int j = 0; j < d; ++j) mu += xr[j];
                     mu /= d;
                     double var = 0.0;
                     for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
                     var /= d;
                     const double istd = 1.0 / std::sqrt(var + 1e-5);
                     if (gn->requires_grad) {
                       gn->ensure_grad();
                       for (int j = 0; j < d; ++j) gn->grad[j] += gr[j] * (xr[j] - mu) * istd;
                     }
                     if (bn->requires_grad) {
                       bn->ensure_grad();
                       for (int j = 0; j < d; ++j) bn->grad[j] += gr[j];
                     }
                     if (xn->requires_grad) {
                       xn->ensure_grad();
                       double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                       for (int j = 0; j < d; ++j) {
                         const double xhat = (xr[j] - mu) * istd;
                         const double dxhat = gr[j] * gn->value[j];
                         mean_dxhat += dxhat;
                         mean_dxhat_xhat += dxhat * xhat;
                       }
                       mean_dxhat /= d;
                       mean_dxhat_xhat /= d;
                       for (int j = 0; j < d; ++j) {
                         const double xhat = (xr[j] - mu) * istd;
                         const double dxhat = gr[j] * gn->value[j];
                         xn->grad[r * d + j] += istd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                       }
                     }
                   }
                 });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
  require_defined(a, "dropout");
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  std::vector<double> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  TensorNode* an = a.node();
  return make_op(a.shape(), std::move(out), "dropout", {a},
                 [an, mask = std::move(mask)](TensorNode& self) {
                   if (!an->requires_grad) return;
                   an->ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                     an->grad[i] += self.grad[i] * mask[i];
                   }
                 });
}

}  // namespace jssm
