#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lrl/errors.hpp"
#include "lrl/rng.hpp"
#include "lrl/tensor.hpp"

namespace lrl {

/// A named trainable tensor with its accumulated gradient.
struct ParamBlock {
  std::string name;
  Tensor tensor;
  Tensor grad;

  ParamBlock(std::string n, Tensor t)
      : name(std::move(n)), tensor(std::move(t)), grad(tensor.shape, 0.0) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Owns parameter blocks with stable addresses, in creation order.
class ParamStore {
 public:
  ParamBlock& add(std::string name, Tensor init) {
    if (find(name) != nullptr) throw ArgumentError("duplicate parameter name: " + name);
    blocks_.emplace_back(std::move(name), std::move(init));
    return blocks_.back();
  }

  ParamBlock* find(std::string_view name) {
    for (auto& b : blocks_) {
      if (b.name == name) return &b;
    }
    return nullptr;
  }

  std::vector<ParamBlock*> all() {
    std::vector<ParamBlock*> out;
    out.reserve(blocks_.size());
    for (auto& b : blocks_) out.push_back(&b);
    return out;
  }

  std::vector<const ParamBlock*> all() const {
    std::vector<const ParamBlock*> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(&b);
    return out;
  }

  std::size_t size() const { return blocks_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.tensor.size();
    return n;
  }

  void zero_grads() {
    for (auto& b : blocks_) b.zero_grad();
  }

 private:
  std::deque<ParamBlock> blocks_;
};

inline void zero_grads(std::span<ParamBlock* const> params) {
  for (auto* p : params) p->zero_grad();
}

/// Plain gradient descent: tensor -= lr * grad.
inline void sgd_step(std::span<ParamBlock* const> params, double lr) {
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->tensor.size(); ++i) p->tensor.data[i] -= lr * p->grad.data[i];
  }
}

/// Uniform in ±gain·√(3/fan_in), i.e. variance gain²/fan_in.
inline void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
}

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool tracked() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().data.at(0); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using ForwardFn = std::function<Tensor(std::span<const Tensor* const>)>;
/// Receives input values, the node's output and output gradient; adds into the
/// non-null input gradient slots.
using BackwardFn = std::function<void(std::span<const Tensor* const>, const Tensor&, const Tensor&,
                                      std::span<Tensor* const>)>;

/// Linear record of primitive operations for reverse-mode differentiation.
/// Nodes are appended in evaluation order, which is a topological order.
class Tape {
 public:
  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    ForwardFn forward;
    BackwardFn backward;
    ParamBlock* param = nullptr;
    bool tracked = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t) { return leaf("constant", std::move(t), false, nullptr); }
  Var variable(Tensor t) { return leaf("variable", std::move(t), true, nullptr); }

  /// Leaf bound to a parameter block; repeated calls return the same node.
  Var param(ParamBlock& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    Var v = leaf("param", p.tensor, true, &p);
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  Var record(std::string_view op, std::initializer_list<Var> inputs, ForwardFn fwd, BackwardFn bwd) {
    return record(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(fwd), std::move(bwd));
  }

  Var record(std::string_view op, std::span<const Var> inputs, ForwardFn fwd, BackwardFn bwd) {
    std::vector<std::size_t> ids;
    std::vector<const Tensor*> vals;
    bool tracked = false;
    for (const Var& v : inputs) {
      if (&v.tape() != this) throw ContractError("operand recorded on a different tape");
      ids.push_back(v.id());
      vals.push_back(&nodes_[v.id()].value);
      tracked = tracked || nodes_[v.id()].tracked;
    }
    Tensor out = fwd(vals);
    Node n;
    n.op = op;
    n.inputs = std::move(ids);
    n.value = std::move(out);
    n.forward = std::move(fwd);
    if (tracked) n.backward = std::move(bwd);
    n.tracked = tracked;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }

  /// Gradient of the most recent backward target w.r.t. `v` (zeros if untouched).
  Tensor grad(const Var& v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.shape.empty() && n.grad.data.empty()) return Tensor(n.value.shape, 0.0);
    return n.grad;
  }

  /// Fills node gradients of `loss` without touching parameter blocks.
  void compute_gradients(const Var& loss) {
    if (&loss.tape() != this) throw ContractError("loss was recorded on a different tape");
    const Node& ln = nodes_[loss.id()];
    if (ln.value.size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " + ln.value.shape_str());
    }
    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[loss.id()].grad = Tensor(ln.value.shape, 1.0);
    visit_order_.clear();
    std::vector<const Tensor*> in_vals;
    std::vector<Tensor*> in_grads;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.data.empty() || !n.tracked) continue;
      visit_order_.push_back(i);
      if (!n.backward) continue;
      in_vals.clear();
      in_grads.clear();
      for (std::size_t in : n.inputs) {
        Node& src = nodes_[in];
        in_vals.push_back(&src.value);
        if (src.tracked) {
          if (src.grad.data.empty()) src.grad = Tensor(src.value.shape, 0.0);
          in_grads.push_back(&src.grad);
        } else {
          in_grads.push_back(nullptr);
        }
      }
      n.backward(in_vals, n.value, n.grad, in_grads);
    }
  }

  /// Parameter gradients from the last compute_gradients, in leaf creation order.
  std::vector<std::pair<ParamBlock*, const Tensor*>> param_gradients() const {
    std::vector<std::pair<ParamBlock*, const Tensor*>> out;
    for (const auto& n : nodes_) {
      if (n.param != nullptr && !n.grad.data.empty()) out.emplace_back(n.param, &n.grad);
    }
    return out;
  }

  void accumulate_param_grads() const {
    for (auto [p, g] : param_gradients()) {
      for (std::size_t i = 0; i < g->size(); ++i) p->grad.data[i] += g->data[i];
    }
  }

  /// compute_gradients followed by accumulation into every touched ParamBlock.
  void backward(const Var& loss) {
    compute_gradients(loss);
    accumulate_param_grads();
  }

  /// Node ids visited by the last backward, in visit order.
  const std::vector<std::size_t>& last_visit_order() const { return visit_order_; }

  /// Re-evaluates every non-leaf node from its recorded inputs; returns the number
  /// of nodes whose recomputed value differs bitwise from the stored one.
  std::size_t replay_mismatches() const {
    std::size_t bad = 0;
    std::vector<const Tensor*> vals;
    for (const auto& n : nodes_) {
      if (!n.forward) continue;
      vals.clear();
      for (std::size_t in : n.inputs) vals.push_back(&nodes_[in].value);
      if (!(n.forward(vals) == n.value)) ++bad;
    }
    return bad;
  }

  /// Describes the first node holding a NaN or Inf, if any.
  std::optional<std::string> first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].value.all_finite()) {
        std::string what = "node " + std::to_string(i) + " (" + std::string(nodes_[i].op) + ", shape " +
                           nodes_[i].value.shape_str() + ")";
        if (nodes_[i].param != nullptr) what += " param " + nodes_[i].param->name;
        return what;
      }
    }
    return std::nullopt;
  }

 private:
  Var leaf(std::string_view op, Tensor t, bool tracked, ParamBlock* p) {
    Node n;
    n.op = op;
    n.value = std::move(t);
    n.tracked = tracked;
    n.param = p;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // deque: value references stay valid as the tape grows
  std::unordered_map<const ParamBlock*, std::size_t> param_nodes_;
  std::vector<std::size_t> visit_order_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline bool Var::tracked() const { return tape_->node(id_).tracked; }

// ---------------------------------------------------------------------------
// Primitive operations. Rank-1 operands are treated as 1×n rows.
// ---------------------------------------------------------------------------

namespace detail {

inline void require_matrix(const Tensor& t, const char* op) {
  if (!t.is_matrix_like()) throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + t.shape_str());
}

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

template <typename F, typename D>
Var unary(std::string_view name, const Var& a, F f, D dfdx) {
  return a.tape().record(
      name, {a},
      [f](std::span<const Tensor* const> in) {
        Tensor out(in[0]->shape);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(in[0]->data[i]);
        return out;
      },
      [dfdx](std::span<const Tensor* const> in, const Tensor& out, const Tensor& g, std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) gin[0]->data[i] += g.data[i] * dfdx(in[0]->data[i], out.data[i]);
      });
}

}  // namespace detail

namespace detail {

/// out[m×n] += x[m×k]·w[k×n], accumulating over p = 0..k-1 in order. Zero
/// entries of x are skipped; with finite w that leaves every bit unchanged.
inline void gemm_acc(const double* __restrict x, const double* __restrict w, double* __restrict out, std::size_t m,
                     std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* __restrict wrow = w + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * wrow[j];
    }
  }
}

/// gx[m×k] += g[m×n]·wᵀ, via a transposed copy of w so the inner loop is contiguous.
inline void grad_input(const double* __restrict g, const double* __restrict w, double* __restrict gx, std::size_t m,
                       std::size_t k, std::size_t n) {
  std::vector<double> wt(k * n);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) wt[j * k + p] = w[p * n + j];
  const double* __restrict wtp = wt.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict row = gx + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double gv = g[i * n + j];
      if (gv == 0.0) continue;
      const double* __restrict wrow = wtp + j * k;
      for (std::size_t p = 0; p < k; ++p) row[p] += gv * wrow[p];
    }
  }
}

/// gw[k×n] += xᵀ·g.
inline void grad_weight(const double* __restrict x, const double* __restrict g, double* __restrict gw, std::size_t m,
                        std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      double* __restrict grow = gw + p * n;
      const double* __restrict grow_in = g + i * n;
      for (std::size_t j = 0; j < n; ++j) grow[j] += xv * grow_in[j];
    }
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix(av, "matmul");
  detail::require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + av.shape_str() + " · " + bv.shape_str());
  }
  return a.tape().record(
      "matmul", {a, b},
      [](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
        Tensor out = Tensor::matrix(m, n);
        detail::gemm_acc(x.data.data(), y.data.data(), out.data.data(), m, k, n);
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
        if (gin[0]) detail::grad_input(g.data.data(), y.data.data(), gin[0]->data.data(), m, k, n);
        if (gin[1]) detail::grad_weight(x.data.data(), g.data.data(), gin[1]->data.data(), m, k, n);
      });
}

/// x·W + b with b broadcast over rows. `bias` may be an invalid Var (no bias).
inline Var affine(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  detail::require_matrix(xv, "affine");
  if (wv.rank() != 2 || xv.cols() != wv.rows()) {
    throw ShapeError("affine: input " + xv.shape_str() + " does not chain into weight " + wv.shape_str());
  }
  if (!bias.valid()) return matmul(x, weight);
  if (bias.value().size() != wv.cols()) throw ShapeError("affine: bias width mismatch");
  return x.tape().record(
      "affine", {x, weight, bias},
      [](std::span<const Tensor* const> in) {
        const Tensor& xm = *in[0];
        const Tensor& w = *in[1];
        const Tensor& b = *in[2];
        const std::size_t m = xm.rows(), k = xm.cols(), n = w.cols();
        Tensor out = Tensor::matrix(m, n);
        detail::gemm_acc(xm.data.data(), w.data.data(), out.data.data(), m, k, n);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += b.data[j];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const Tensor& xm = *in[0];
        const Tensor& w = *in[1];
        const std::size_t m = xm.rows(), k = xm.cols(), n = w.cols();
        if (gin[0]) detail::grad_input(g.data.data(), w.data.data(), gin[0]->data.data(), m, k, n);
        if (gin[1]) detail::grad_weight(xm.data.data(), g.data.data(), gin[1]->data.data(), m, k, n);
        if (gin[2]) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gin[2]->data[j] += g.data[i * n + j];
        }
      });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same(a.value(), b.value(), "add");
  return a.tape().record(
      "add", {a, b},
      [](std::span<const Tensor* const> in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += in[1]->data[i];
        return out;
      },
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        for (auto* gi : gin)
          if (gi)
            for (std::size_t i = 0; i < g.size(); ++i) gi->data[i] += g.data[i];
      });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same(a.value(), b.value(), "sub");
  return a.tape().record(
      "sub", {a, b},
      [](std::span<const Tensor* const> in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= in[1]->data[i];
        return out;
      },
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        if (gin[0])
          for (std::size_t i = 0; i < g.size(); ++i) gin[0]->data[i] += g.data[i];
        if (gin[1])
          for (std::size_t i = 0; i < g.size(); ++i) gin[1]->data[i] -= g.data[i];
      });
}

inline Var hadamard(const Var& a, const Var& b) {
  detail::require_same(a.value(), b.value(), "hadamard");
  return a.tape().record(
      "hadamard", {a, b},
      [](std::span<const Tensor* const> in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= in[1]->data[i];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        if (gin[0])
          for (std::size_t i = 0; i < g.size(); ++i) gin[0]->data[i] += g.data[i] * in[1]->data[i];
        if (gin[1])
          for (std::size_t i = 0; i < g.size(); ++i) gin[1]->data[i] += g.data[i] * in[0]->data[i];
      });
}

inline Var relu(const Var& a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh(const Var& a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var scale(const Var& a, double c) {
  return detail::unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(const Var& a, double c) {
  return detail::unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

enum class ElementwiseOp { add, sub, hadamard, relu, tanh };

/// Dispatcher over the elementwise family; binary ops need `b`.
inline Var elementwise(ElementwiseOp op, const Var& a, const Var& b = Var()) {
  switch (op) {
    case ElementwiseOp::relu:
      return relu(a);
    case ElementwiseOp::tanh:
      return tanh(a);
    default:
      break;
  }
  if (!b.valid()) throw ArgumentError("binary elementwise op needs two operands");
  switch (op) {
    case ElementwiseOp::add:
      return add(a, b);
    case ElementwiseOp::sub:
      return sub(a, b);
    default:
      return hadamard(a, b);
  }
}

/// Row-wise softmax with max subtraction.
inline Var softmax(const Var& a) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "softmax");
  if (av.size() == 0) throw ShapeError("softmax: empty input");
  return a.tape().record(
      "softmax", {a},
      [](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        Tensor out(x.shape);
        const std::size_t r = x.rows(), c = x.cols();
        for (std::size_t i = 0; i < r; ++i) {
          const double* xr = &x.data[i * c];
          double* yr = &out.data[i * c];
          double mx = xr[0];
          for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
          }
          for (std::size_t j = 0; j < c; ++j) yr[j] /= s;
        }
        return out;
      },
      [](std::span<const Tensor* const>, const Tensor& y, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = y.rows(), c = y.cols();
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g.data[i * c + j] * y.data[i * c + j];
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[i * c + j] += y.data[i * c + j] * (g.data[i * c + j] - dot);
        }
      });
}

/// Sum of all elements, shape [1].
inline Var sum(const Var& a) {
  return a.tape().record(
      "sum", {a},
      [](std::span<const Tensor* const> in) {
        double s = 0.0;
        for (double v : in[0]->data) s += v;
        return Tensor::scalar(s);
      },
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        for (auto& v : gin[0]->data) v += g.data[0];
      });
}

inline Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

/// Column sums: [r×c] -> [1×c].
inline Var sum_rows(const Var& a) {
  detail::require_matrix(a.value(), "sum_rows");
  return a.tape().record(
      "sum_rows", {a},
      [](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t r = x.rows(), c = x.cols();
        Tensor out = Tensor::matrix(1, c);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) out.data[j] += x.data[i * c + j];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[i * c + j] += g.data[j];
      });
}

/// Column means: [r×c] -> [1×c].
inline Var mean_rows(const Var& a) {
  const std::size_t r = a.value().rows();
  if (r == 0) throw ShapeError("mean_rows: no rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(r));
}

/// Row sums: [r×c] -> [r×1].
inline Var sum_cols(const Var& a) {
  detail::require_matrix(a.value(), "sum_cols");
  return a.tape().record(
      "sum_cols", {a},
      [](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t r = x.rows(), c = x.cols();
        Tensor out = Tensor::matrix(r, 1);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) out.data[i] += x.data[i * c + j];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[i * c + j] += g.data[i];
      });
}

/// Stacks `n` copies of a single row: [1×c] -> [n×c].
inline Var repeat_rows(const Var& a, std::size_t n) {
  if (a.value().rows() != 1) throw ShapeError("repeat_rows: expected a single row, got " + a.value().shape_str());
  return a.tape().record(
      "repeat_rows", {a},
      [n](std::span<const Tensor* const> in) {
        const std::size_t c = in[0]->cols();
        Tensor out = Tensor::matrix(n, c);
        for (std::size_t i = 0; i < n; ++i) std::copy(in[0]->data.begin(), in[0]->data.end(), out.data.begin() + i * c);
        return out;
      },
      [n](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t c = in[0]->cols();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[j] += g.data[i * c + j];
      });
}

/// Selects rows by index (repeats allowed): [r×c] -> [idx.size()×c].
inline Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "gather_rows");
  for (std::size_t i : idx)
    if (i >= av.rows()) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range");
  return a.tape().record(
      "gather_rows", {a},
      [idx](std::span<const Tensor* const> in) {
        const std::size_t c = in[0]->cols();
        Tensor out = Tensor::matrix(idx.size(), c);
        for (std::size_t r = 0; r < idx.size(); ++r)
          std::copy_n(in[0]->data.begin() + idx[r] * c, c, out.data.begin() + r * c);
        return out;
      },
      [idx](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t c = in[0]->cols();
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[idx[r] * c + j] += g.data[r * c + j];
      });
}

inline Var row(const Var& a, std::size_t i) { return gather_rows(a, {i}); }

/// Horizontal concatenation of two matrices with equal row counts.
inline Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_matrix(av, "concat_cols");
  detail::require_matrix(bv, "concat_cols");
  if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row count mismatch " + av.shape_str() + " vs " + bv.shape_str());
  return a.tape().record(
      "concat_cols", {a, b},
      [](std::span<const Tensor* const> in) {
        const std::size_t r = in[0]->rows(), ca = in[0]->cols(), cb = in[1]->cols();
        Tensor out = Tensor::matrix(r, ca + cb);
        for (std::size_t i = 0; i < r; ++i) {
          std::copy_n(in[0]->data.begin() + i * ca, ca, out.data.begin() + i * (ca + cb));
          std::copy_n(in[1]->data.begin() + i * cb, cb, out.data.begin() + i * (ca + cb) + ca);
        }
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = in[0]->rows(), ca = in[0]->cols(), cb = in[1]->cols();
        for (std::size_t i = 0; i < r; ++i) {
          if (gin[0])
            for (std::size_t j = 0; j < ca; ++j) gin[0]->data[i * ca + j] += g.data[i * (ca + cb) + j];
          if (gin[1])
            for (std::size_t j = 0; j < cb; ++j) gin[1]->data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
        }
      });
}

/// Vertical concatenation of row blocks with equal column counts.
inline Var stack_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("stack_rows: nothing to stack");
  const std::size_t c = parts.front().value().cols();
  for (const Var& p : parts) {
    detail::require_matrix(p.value(), "stack_rows");
    if (p.value().cols() != c) throw ShapeError("stack_rows: column mismatch");
  }
  return parts.front().tape().record(
      "stack_rows", std::span<const Var>(parts),
      [c](std::span<const Tensor* const> in) {
        std::size_t r = 0;
        for (const Tensor* t : in) r += t->rows();
        Tensor out = Tensor::matrix(r, c);
        auto it = out.data.begin();
        for (const Tensor* t : in) it = std::copy(t->data.begin(), t->data.end(), it);
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < in.size(); ++p) {
          if (gin[p])
            for (std::size_t i = 0; i < in[p]->size(); ++i) gin[p]->data[i] += g.data[off + i];
          off += in[p]->size();
        }
      });
}

inline Var reshape(const Var& a, std::vector<std::size_t> shape) {
  if (Tensor::element_count(shape) != a.value().size()) {
    throw ShapeError("reshape: " + a.value().shape_str() + " to " + Tensor::shape_string(shape));
  }
  return a.tape().record(
      "reshape", {a},
      [shape](std::span<const Tensor* const> in) { return Tensor(shape, in[0]->data); },
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0]->data[i] += g.data[i];
      });
}

inline Var transpose(const Var& a) {
  detail::require_matrix(a.value(), "transpose");
  return a.tape().record(
      "transpose", {a},
      [](std::span<const Tensor* const> in) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        Tensor out = Tensor::matrix(c, r);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = in[0]->data[i * c + j];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[i * c + j] += g.data[j * r + i];
      });
}

/// Channelwise max over consecutive row segments of length `segment`:
/// [(n·segment)×c] -> [n×c]. Ties route the gradient to the first maximal row.
inline Var segment_max_rows(const Var& a, std::size_t segment) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "segment_max_rows");
  if (segment == 0 || av.rows() % segment != 0) throw ShapeError("segment_max_rows: rows not divisible by segment");
  auto argmax = [segment](const Tensor& x) {
    const std::size_t n = x.rows() / segment, c = x.cols();
    std::vector<std::size_t> arg(n * c);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t j = 0; j < c; ++j) {
        std::size_t best = s * segment;
        for (std::size_t r = s * segment + 1; r < (s + 1) * segment; ++r)
          if (x.data[r * c + j] > x.data[best * c + j]) best = r;
        arg[s * c + j] = best;
      }
    return arg;
  };
  return a.tape().record(
      "segment_max_rows", {a},
      [segment, argmax](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t c = x.cols();
        auto arg = argmax(x);
        Tensor out = Tensor::matrix(x.rows() / segment, c);
        for (std::size_t i = 0; i < arg.size(); ++i) out.data[i] = x.data[arg[i] * c + i % c];
        return out;
      },
      [argmax](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t c = in[0]->cols();
        auto arg = argmax(*in[0]);
        for (std::size_t i = 0; i < arg.size(); ++i) gin[0]->data[arg[i] * c + i % c] += g.data[i];
      });
}

/// Channelwise max over all rows: [r×c] -> [1×c].
inline Var max_rows(const Var& a) { return segment_max_rows(a, a.value().rows()); }

/// Means over consecutive row segments: [(n·segment)×c] -> [n×c].
inline Var segment_mean_rows(const Var& a, std::size_t segment) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "segment_mean_rows");
  if (segment == 0 || av.rows() % segment != 0) throw ShapeError("segment_mean_rows: rows not divisible by segment");
  const double inv = 1.0 / static_cast<double>(segment);
  return a.tape().record(
      "segment_mean_rows", {a},
      [segment, inv](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t n = x.rows() / segment, c = x.cols();
        Tensor out = Tensor::matrix(n, c);
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) out.data[(r / segment) * c + j] += x.data[r * c + j];
        for (auto& v : out.data) v *= inv;
        return out;
      },
      [segment, inv](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t c = in[0]->cols();
        for (std::size_t r = 0; r < in[0]->rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[r * c + j] += g.data[(r / segment) * c + j] * inv;
      });
}

/// Sums of consecutive groups of `segment` rows: [n·s×c] -> [n×c].
inline Var segment_sum_rows(const Var& a, std::size_t segment) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "segment_sum_rows");
  if (segment == 0 || av.rows() % segment != 0) throw ShapeError("segment_sum_rows: rows not divisible by segment");
  return a.tape().record(
      "segment_sum_rows", {a},
      [segment](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t n = x.rows() / segment, c = x.cols();
        Tensor out = Tensor::matrix(n, c);
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) out.data[(r / segment) * c + j] += x.data[r * c + j];
        return out;
      },
      [segment](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t c = in[0]->cols();
        for (std::size_t r = 0; r < in[0]->rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[r * c + j] += g.data[(r / segment) * c + j];
      });
}

/// Row i of `a` times the scalar w[i]: [r×c], [r×1] -> [r×c].
inline Var mul_rows(const Var& a, const Var& w) {
  const Tensor& av = a.value();
  detail::require_matrix(av, "mul_rows");
  if (w.value().size() != av.rows()) {
    throw ShapeError("mul_rows: need one weight per row, got " + w.value().shape_str() + " for " + av.shape_str());
  }
  return a.tape().record(
      "mul_rows", {a, w},
      [](std::span<const Tensor* const> in) {
        const Tensor& x = *in[0];
        const std::size_t r = x.rows(), c = x.cols();
        Tensor out(x.shape);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = in[1]->data[i] * x.data[i * c + j];
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const Tensor& x = *in[0];
        const std::size_t r = x.rows(), c = x.cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            if (gin[0]) gin[0]->data[i * c + j] += g.data[i * c + j] * in[1]->data[i];
            if (gin[1]) gin[1]->data[i] += g.data[i * c + j] * x.data[i * c + j];
          }
      });
}

/// Euclidean norm of each row: [r×c] -> [r×1]. Gradient at a zero row is zero.
inline Var row_norms(const Var& a) {
  detail::require_matrix(a.value(), "row_norms");
  return a.tape().record(
      "row_norms", {a},
      [](std::span<const Tensor* const> in) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        Tensor out = Tensor::matrix(r, 1);
        for (std::size_t i = 0; i < r; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) s += in[0]->data[i * c + j] * in[0]->data[i * c + j];
          out.data[i] = std::sqrt(s);
        }
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor& y, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        for (std::size_t i = 0; i < r; ++i) {
          if (y.data[i] == 0.0) continue;
          const double f = g.data[i] / y.data[i];
          for (std::size_t j = 0; j < c; ++j) gin[0]->data[i * c + j] += f * in[0]->data[i * c + j];
        }
      });
}

/// Row i of `mats` read as a row-major 3×3 matrix, applied to row i of `vecs`:
/// [n×9], [n×3] -> [n×3].
inline Var batched_matvec3(const Var& mats, const Var& vecs) {
  const Tensor& mv = mats.value();
  const Tensor& vv = vecs.value();
  if (mv.cols() != 9 || vv.cols() != 3 || mv.rows() != vv.rows()) {
    throw ShapeError("batched_matvec3: expected [n×9] and [n×3], got " + mv.shape_str() + " and " + vv.shape_str());
  }
  return mats.tape().record(
      "batched_matvec3", {mats, vecs},
      [](std::span<const Tensor* const> in) {
        const std::size_t n = in[0]->rows();
        Tensor out = Tensor::matrix(n, 3);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < 3; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < 3; ++c) acc += in[0]->data[i * 9 + r * 3 + c] * in[1]->data[i * 3 + c];
            out.data[i * 3 + r] = acc;
          }
        return out;
      },
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const std::size_t n = in[0]->rows();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) {
              if (gin[0]) gin[0]->data[i * 9 + r * 3 + c] += g.data[i * 3 + r] * in[1]->data[i * 3 + c];
              if (gin[1]) gin[1]->data[i * 3 + c] += g.data[i * 3 + r] * in[0]->data[i * 9 + r * 3 + c];
            }
      });
}

/// -log softmax(logits)[label] for a single row of logits.
inline Var cross_entropy(const Var& logits, std::size_t label) {
  const Tensor& lv = logits.value();
  if (lv.rows() != 1 || lv.cols() < 2) throw ShapeError("cross_entropy: expected one row of >= 2 logits");
  if (label >= lv.cols()) throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range");
  return logits.tape().record(
      "cross_entropy", {logits},
      [label](std::span<const Tensor* const> in) {
        const auto& x = in[0]->data;
        const double mx = *std::max_element(x.begin(), x.end());
        double s = 0.0;
        for (double v : x) s += std::exp(v - mx);
        return Tensor::scalar(mx + std::log(s) - x[label]);
      },
      [label](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
        const auto& x = in[0]->data;
        const double mx = *std::max_element(x.begin(), x.end());
        double s = 0.0;
        for (double v : x) s += std::exp(v - mx);
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double p = std::exp(x[j] - mx) / s;
          gin[0]->data[j] += g.data[0] * (p - (j == label ? 1.0 : 0.0));
        }
      });
}

}  // namespace lrl
