#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "nstlab/error.hpp"

namespace nst {

using Shape = std::vector<std::size_t>;

namespace detail {
struct Node;
}

/// Dense float64 n-dimensional array, row-major, participating in a
/// reverse-mode differentiation graph. Copies are shallow: they alias the
/// same graph node. A graph lives exactly as long as the tensors that
/// reference it; dropping the loss tensor after backward() frees the tape.
///
/// Graph nodes are confined to one thread. Leaf tensors that never enter an
/// operation are safe to share read-only across threads.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, std::vector<double> values);
  /// Leaf with requires-grad set; a trainable parameter.
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // product of all extents but the last
  std::size_t cols() const;  // last extent (1 for scalars)

  /// View into the stored values. Only callable on lvalues: a view into a
  /// temporary would dangle as soon as the statement ends.
  std::span<const double> values() const&;
  std::span<const double> values() const&& = delete;
  /// Mutable view. Only meaningful on leaves (optimizer updates, finite
  /// differences); mutating an interior node invalidates the graph.
  std::span<double> values_mut() &;

  /// Detached value copy, safe to keep after the tensor is gone.
  std::vector<double> to_vector() const;

  double item() const;  // requires size() == 1
  double operator[](std::size_t i) const;

  std::int64_t id() const;
  bool requires_grad() const;

  /// Value copy detached from any graph.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op_tensor(Shape, std::vector<double>, std::vector<Tensor>,
                               std::function<void(detail::Node&)>);
};

enum class OpKind {
  Add,
  Sub,
  Mul,        // elementwise
  ScalarMul,  // tensor * constant
  MatMul,
  Relu,
  Exp,
  Log,
  Sum,
  Mean,
  SquaredL2Norm,
  Softmax,     // over last axis, max-subtracted
  LogSumExp,   // over last axis, max-subtracted
  LogSoftmax,  // over last axis, max-subtracted
  ClampMin,    // elementwise max(x, attr)
};

/// Generic dispatch. ScalarMul and ClampMin read their constant from `attr`.
Tensor apply(OpKind kind, std::span<const Tensor> inputs, double attr = 0.0);

Tensor add(const Tensor& a, const Tensor& b);  // same shape, or (n,k)+(k) row broadcast
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor squared_l2_norm(const Tensor& a);
Tensor softmax(const Tensor& a);
Tensor logsumexp(const Tensor& a);
Tensor log_softmax(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

/// Gradients keyed by parameter node-id, each shaped like its parameter.
using GradientMap = std::unordered_map<std::int64_t, Tensor>;

/// Reverse-mode gradients of a scalar loss with respect to each parameter.
/// Fan-out accumulates additively. Throws Contract if loss is not scalar,
/// MissingLeaf if a parameter is not reachable from the loss.
GradientMap backward(const Tensor& loss, std::span<const Tensor> parameters);

/// Central-difference gradient oracle: (f(p + h e_i) - f(p - h e_i)) / 2h.
/// Independent of the reverse-mode path; used to cross-check it.
GradientMap finite_diff_grad(const std::function<double(std::span<const Tensor>)>& f,
                             std::span<const Tensor> parameters, double step);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // backward scratch, sized lazily
  std::vector<Tensor> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grad
  std::int64_t id = 0;
  bool requires_grad = false;
};

}  // namespace detail

}  // namespace nst
