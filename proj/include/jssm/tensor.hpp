// tensor.hpp - dense double tensors with reverse-mode automatic differentiation.
//
// Values are computed eagerly; each differentiable op records its inputs and a
// backprop callback on the result node. backward() walks the recorded graph in
// reverse topological order and accumulates dLoss/dX into every reachable
// tensor that requires gradients.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jssm/common.hpp"

namespace jssm {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backprop;

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
  void accumulate_grad(const double* g, std::size_t n) {
    ensure_grad();
    for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Gaussian-filled tensor, mean 0, given stddev.
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::size_t size() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  /// In-place mutation of stored values; meant for leaf parameters only
  /// (optimizer updates, checkpoint loading).
  std::span<double> mutable_data();

  bool grad_allocated() const;
  /// Gradient view; zero-filled on first access for requires_grad tensors.
  std::span<const double> grad() const;
  void zero_grad();

  /// Scalar value; throws unless size() == 1.
  double item() const;
  double at(std::initializer_list<int> idx) const;

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> handle() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Reverse topological record of one forward pass: every node's inputs appear
/// before the node itself. Built by tracing input edges from an output.
class Graph {
 public:
  static Graph trace(const Tensor& output);

  const std::vector<detail::TensorNode*>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }
  bool topologically_consistent() const;

  /// Seeds d(output)/d(output) = 1 and runs every backprop callback in
  /// reverse order. Requires a scalar output.
  void run_backward();

 private:
  std::shared_ptr<detail::TensorNode> root_;
  std::vector<detail::TensorNode*> order_;
};

// ---- arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);            // same shape, elementwise
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);            // elementwise product
Tensor scale(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, const Tensor& s);     // s is a scalar tensor
Tensor add_rowvec(const Tensor& m, const Tensor& v);     // broadcast v over rows of m

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- structure ----
Tensor row(const Tensor& m, int i);
Tensor slice_rows(const Tensor& m, int start, int count);
Tensor slice_cols(const Tensor& m, int start, int count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);      // k vectors of [d] -> k x d
Tensor stack_scalars(const std::vector<Tensor>& xs);     // k scalars -> [k]
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

// ---- reductions and losses ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& u, const Tensor& v);
Tensor mse(const Tensor& pred, const Tensor& target);
Tensor cosine(const Tensor& u, const Tensor& v);

// ---- nonlinearities ----
Tensor softmax(const Tensor& a, int axis);
Tensor gelu(const Tensor& a);
/// Row-wise (last-dimension) layer normalization with learnable gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
/// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

/// Populates gradients of every tensor reachable from `loss`.
void backward(const Tensor& loss);

}  // namespace jssm
