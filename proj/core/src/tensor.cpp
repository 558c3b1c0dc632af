#include "nstlab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace nst {

namespace {

std::atomic<std::int64_t> g_next_node_id{1};

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

[[noreturn]] void throw_dim(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::Dimension, std::string(op) + ": incompatible shapes " +
                                        shape_str(a) + " and " + shape_str(b));
}

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) throw Error(ErrorKind::Dimension, "tensor: zero extent in shape " + shape_str(shape));
  }
  if (values.size() != shape_size(shape)) {
    throw Error(ErrorKind::Dimension,
                "tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor make_op_tensor(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                      std::function<void(detail::Node&)> backprop) {
  auto node = make_leaf(std::move(shape), std::move(values), false);
  node->parents = std::move(parents);
  node->backprop = std::move(backprop);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  Tensor t;
  t.node_ = make_leaf(std::move(shape), std::move(values), false);
  return t;
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t;
  t.node_ = make_leaf(std::move(shape), std::move(values), true);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  if (s.empty()) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const {
  const Shape& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const& { return node_->values; }
std::span<double> Tensor::values_mut() & { return node_->values; }

std::vector<double> Tensor::to_vector() const { return node_->values; }

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorKind::Contract, "item: tensor has " + std::to_string(size()) + " values");
  }
  return node_->values[0];
}

double Tensor::operator[](std::size_t i) const { return node_->values[i]; }

std::int64_t Tensor::id() const { return node_->id; }
bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor Tensor::detach() const {
  return Tensor::from(node_->shape, node_->values);
}

namespace {

// Grad accumulation helper used inside backprop lambdas.
std::vector<double>& grad_of(const Tensor& t) {
  detail::Node& n = *t.node();
  if (n.grad.size() != n.values.size()) n.grad.assign(n.values.size(), 0.0);
  return n.grad;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    std::vector<double> out(a.size());
    auto va = a.values(), vb = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    return make_op_tensor(sa, std::move(out), {a, b}, [](detail::Node& self) {
      auto& ga = grad_of(self.parents[0]);
      auto& gb = grad_of(self.parents[1]);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        ga[i] += self.grad[i];
        gb[i] += self.grad[i];
      }
    });
  }
  // (rows, k) + (k): broadcast the row across rows (bias add)
  if (sa.size() >= 1 && sb.size() == 1 && a.cols() == sb[0]) {
    std::size_t rows = a.rows(), k = a.cols();
    std::vector<double> out(a.size());
    auto va = a.values(), vb = b.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < k; ++c) out[r * k + c] = va[r * k + c] + vb[c];
    return make_op_tensor(sa, std::move(out), {a, b}, [rows, k](detail::Node& self) {
      auto& ga = grad_of(self.parents[0]);
      auto& gb = grad_of(self.parents[1]);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < k; ++c) {
          ga[r * k + c] += self.grad[r * k + c];
          gb[c] += self.grad[r * k + c];
        }
    });
  }
  throw_dim("add", sa, sb);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw_dim("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  return make_op_tensor(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto& gb = grad_of(self.parents[1]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i];
      gb[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw_dim("elementwise-mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return make_op_tensor(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto& gb = grad_of(self.parents[1]);
    auto va = self.parents[0].values();
    auto vb = self.parents[1].values();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i] * vb[i];
      gb[i] += self.grad[i] * va[i];
    }
  });
}

Tensor scalar_mul(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * c;
  return make_op_tensor(a.shape(), std::move(out), {a}, [c](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * c;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) throw_dim("matmul", sa, sb);
  std::size_t n = sa[0], m = sa[1], p = sb[1];
  std::vector<double> out(n * p, 0.0);
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      double aik = va[i * m + k];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += aik * vb[k * p + j];
    }
  return make_op_tensor({n, p}, std::move(out), {a, b}, [n, m, p](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto& gb = grad_of(self.parents[1]);
    auto va = self.parents[0].values();
    auto vb = self.parents[1].values();
    // dA = G B^T, dB = A^T G
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        double g = self.grad[i * p + j];
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) {
          ga[i * m + k] += g * vb[k * p + j];
          gb[k * p + j] += g * va[i * m + k];
        }
      }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0.0 ? va[i] : 0.0;
  return make_op_tensor(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto va = self.parents[0].values();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (va[i] > 0.0) ga[i] += self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(va[i]);
  return make_op_tensor(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * self.values[i];
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (va[i] <= 0.0) {
      throw Error(ErrorKind::Domain, "log: input " + std::to_string(va[i]) + " not positive");
    }
    out[i] = std::log(va[i]);
  }
  return make_op_tensor(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto va = self.parents[0].values();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] / va[i];
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_op_tensor({}, {acc}, {a}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  double inv = 1.0 / static_cast<double>(a.size());
  return make_op_tensor({}, {acc * inv}, {a}, [inv](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[0] * inv;
  });
}

Tensor squared_l2_norm(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return make_op_tensor({}, {acc}, {a}, [](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto va = self.parents[0].values();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[0] * 2.0 * va[i];
  });
}

namespace {

// Shared row-wise kernel: out receives softmax rows; lse (optional) the
// per-row logsumexp. Max-subtracted for stability.
void softmax_rows(std::span<const double> in, std::size_t rows, std::size_t k,
                  std::vector<double>* out, std::vector<double>* lse) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * k;
    double mx = row[0];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(row[c] - mx);
    if (out) {
      for (std::size_t c = 0; c < k; ++c) (*out)[r * k + c] = std::exp(row[c] - mx) / denom;
    }
    if (lse) (*lse)[r] = mx + std::log(denom);
  }
}

Shape drop_last_axis(const Shape& s) {
  Shape out(s.begin(), s.end() - 1);
  return out;
}

}  // namespace

Tensor softmax(const Tensor& a) {
  if (a.shape().empty()) throw Error(ErrorKind::Dimension, "softmax: scalar input");
  std::size_t rows = a.rows(), k = a.cols();
  std::vector<double> out(a.size());
  softmax_rows(a.values(), rows, k, &out, nullptr);
  return make_op_tensor(a.shape(), std::move(out), {a}, [rows, k](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    // dx_i = y_i * (g_i - sum_j g_j y_j) per row
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += self.grad[r * k + c] * self.values[r * k + c];
      for (std::size_t c = 0; c < k; ++c)
        ga[r * k + c] += self.values[r * k + c] * (self.grad[r * k + c] - dot);
    }
  });
}

Tensor logsumexp(const Tensor& a) {
  if (a.shape().empty()) throw Error(ErrorKind::Dimension, "logsumexp: scalar input");
  std::size_t rows = a.rows(), k = a.cols();
  std::vector<double> lse(rows);
  softmax_rows(a.values(), rows, k, nullptr, &lse);
  return make_op_tensor(drop_last_axis(a.shape()), std::move(lse), {a},
                        [rows, k](detail::Node& self) {
                          auto& ga = grad_of(self.parents[0]);
                          auto va = self.parents[0].values();
                          std::vector<double> sm(rows * k);
                          softmax_rows(va, rows, k, &sm, nullptr);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < k; ++c)
                              ga[r * k + c] += self.grad[r] * sm[r * k + c];
                        });
}

Tensor log_softmax(const Tensor& a) {
  if (a.shape().empty()) throw Error(ErrorKind::Dimension, "log-softmax: scalar input");
  std::size_t rows = a.rows(), k = a.cols();
  std::vector<double> lse(rows);
  softmax_rows(a.values(), rows, k, nullptr, &lse);
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = va[r * k + c] - lse[r];
  return make_op_tensor(a.shape(), std::move(out), {a}, [rows, k](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    // dx = g - softmax(x) * rowsum(g)
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < k; ++c) gsum += self.grad[r * k + c];
      for (std::size_t c = 0; c < k; ++c) {
        double sm = std::exp(self.values[r * k + c]);
        ga[r * k + c] += self.grad[r * k + c] - sm * gsum;
      }
    }
  });
}

Tensor clamp_min(const Tensor& a, double floor) {
  std::vector<double> out(a.size());
  auto va = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] < floor ? floor : va[i];
  return make_op_tensor(a.shape(), std::move(out), {a}, [floor](detail::Node& self) {
    auto& ga = grad_of(self.parents[0]);
    auto va = self.parents[0].values();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (va[i] >= floor) ga[i] += self.grad[i];
  });
}

Tensor apply(OpKind kind, std::span<const Tensor> inputs, double attr) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw Error(ErrorKind::Contract, "apply: operation expects " + std::to_string(n) +
                                           " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::Add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::Sub: need(2); return sub(inputs[0], inputs[1]);
    case OpKind::Mul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::ScalarMul: need(1); return scalar_mul(inputs[0], attr);
    case OpKind::MatMul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::Relu: need(1); return relu(inputs[0]);
    case OpKind::Exp: need(1); return exp(inputs[0]);
    case OpKind::Log: need(1); return log(inputs[0]);
    case OpKind::Sum: need(1); return sum(inputs[0]);
    case OpKind::Mean: need(1); return mean(inputs[0]);
    case OpKind::SquaredL2Norm: need(1); return squared_l2_norm(inputs[0]);
    case OpKind::Softmax: need(1); return softmax(inputs[0]);
    case OpKind::LogSumExp: need(1); return logsumexp(inputs[0]);
    case OpKind::LogSoftmax: need(1); return log_softmax(inputs[0]);
    case OpKind::ClampMin: need(1); return clamp_min(inputs[0], attr);
  }
  throw Error(ErrorKind::Contract, "apply: unknown operation kind");
}

GradientMap backward(const Tensor& loss, std::span<const Tensor> parameters) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorKind::Contract, "backward: loss must be a scalar tensor");
  }

  // Reverse topological order via iterative DFS.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].node().get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  for (const Tensor& p : parameters) {
    if (!p.requires_grad()) {
      throw Error(ErrorKind::Contract,
                  "backward: parameter node " + std::to_string(p.id()) + " has requires-grad unset");
    }
    if (!visited.contains(p.node().get())) {
      throw Error(ErrorKind::MissingLeaf,
                  "backward: parameter node " + std::to_string(p.id()) + " not reachable from loss");
    }
  }

  for (detail::Node* n : visited) n->grad.assign(n->values.size(), 0.0);
  loss.node()->grad[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }

  GradientMap grads;
  grads.reserve(parameters.size());
  for (const Tensor& p : parameters) {
    grads.emplace(p.id(), Tensor::from(p.shape(), p.node()->grad));
  }
  for (detail::Node* n : visited) {
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
  return grads;
}

GradientMap finite_diff_grad(const std::function<double(std::span<const Tensor>)>& f,
                             std::span<const Tensor> parameters, double step) {
  if (step <= 0.0) throw Error(ErrorKind::Contract, "finite_diff_grad: step must be positive");
  // Work on leaf copies so the caller's tensors are untouched.
  std::vector<Tensor> work;
  work.reserve(parameters.size());
  for (const Tensor& p : parameters) work.push_back(Tensor::param(p.shape(), {p.values().begin(), p.values().end()}));

  GradientMap grads;
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    std::vector<double> g(work[pi].size());
    auto v = work[pi].values_mut();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double saved = v[i];
      v[i] = saved + step;
      double up = f(work);
      v[i] = saved - step;
      double down = f(work);
      v[i] = saved;
      g[i] = (up - down) / (2.0 * step);
    }
    grads.emplace(parameters[pi].id(), Tensor::from(work[pi].shape(), std::move(g)));
  }
  return grads;
}

}  // namespace nst
