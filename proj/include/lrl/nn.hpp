#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lrl/autodiff.hpp"

namespace lrl {

enum class Activation { identity, relu, tanh };

inline Var activate(Activation act, const Var& x) {
  switch (act) {
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::identity:
      break;
  }
  return x;
}

/// Weight stored [in×out] so a row batch maps as x·W + b. `bias` may be null.
struct Dense {
  ParamBlock* weight = nullptr;
  ParamBlock* bias = nullptr;

  std::size_t in_dim() const { return weight->tensor.shape[0]; }
  std::size_t out_dim() const { return weight->tensor.shape[1]; }
};

struct Mlp {
  std::vector<Dense> layers;
  std::vector<Activation> activations;

  bool empty() const { return layers.empty(); }
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

/// Weights uniform in ±gain·√(3/fan_in); gain √2 suits a following ReLU.
inline Dense make_dense(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                        bool with_bias = true, double gain = 1.0) {
  Tensor w = Tensor::matrix(in, out);
  init_uniform(w, in, rng, gain);
  Dense d;
  d.weight = &store.add(name + ".weight", std::move(w));
  if (with_bias) d.bias = &store.add(name + ".bias", Tensor::matrix(1, out));
  return d;
}

/// `widths` lists every layer width including the input; one activation per layer.
inline Mlp make_mlp(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                    const std::vector<Activation>& acts, Rng& rng) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1) {
    throw ShapeError("make_mlp: " + name + " needs widths.size() == activations.size() + 1");
  }
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const double gain = acts[i] == Activation::relu ? std::sqrt(2.0) : 1.0;
    m.layers.push_back(make_dense(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng, true, gain));
  }
  m.activations = acts;
  return m;
}

inline Var apply(const Dense& d, const Var& x) {
  Tape& t = x.tape();
  return affine(x, t.param(*d.weight), d.bias ? t.param(*d.bias) : Var());
}

/// y = act_n(W_n · ... act_1(W_1 x + b_1) ... + b_n), rows of `x` processed independently.
inline Var mlp_forward(const Mlp& mlp, const Var& x) {
  if (mlp.activations.size() != mlp.layers.size()) throw ShapeError("mlp_forward: activation count mismatch");
  Var h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    if (h.value().cols() != mlp.layers[i].in_dim()) {
      throw ShapeError("mlp_forward: layer " + std::to_string(i) + " expects width " +
                       std::to_string(mlp.layers[i].in_dim()) + ", got " + std::to_string(h.value().cols()));
    }
    h = activate(mlp.activations[i], apply(mlp.layers[i], h));
  }
  return h;
}

/// Flat form: params alternate weight, bias for each layer.
inline Var mlp_forward(std::span<ParamBlock* const> params, std::span<const Activation> acts, const Var& x) {
  if (params.size() != 2 * acts.size()) throw ShapeError("mlp_forward: expected a weight and bias per activation");
  Mlp m;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    m.layers.push_back(Dense{params[2 * i], params[2 * i + 1]});
    if (params[2 * i]->tensor.rank() != 2) throw ShapeError("mlp_forward: weight must be a matrix");
    if (i > 0 && m.layers[i].in_dim() != m.layers[i - 1].out_dim()) throw ShapeError("mlp_forward: layer chain mismatch");
  }
  m.activations.assign(acts.begin(), acts.end());
  return mlp_forward(m, x);
}

}  // namespace lrl
