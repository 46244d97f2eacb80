#pragma once

#include <cstddef>
#include <vector>

#include "lrl/autodiff.hpp"
#include "lrl/geometry.hpp"

namespace lrl {

/// (1/N) Σ_j ‖ĉ_j − p̃_j‖ with p̃_j the nearest previous-layer point (lowest index on
/// ties). Which point is nearest is fixed for the step; gradient flows through ĉ and,
/// when the previous layer was itself shifted, through that point's position.
inline Var fit_loss(const Var& shifted_centers, const Var& prev_points) {
  const Tensor& prev = prev_points.value();
  require_points(prev, "fit_loss");
  const Tensor& c = shifted_centers.value();
  if (c.cols() != 3 || c.rows() == 0) throw ShapeError("fit_loss: expected [m×3] centers");
  std::vector<std::size_t> nearest(c.rows());
  for (std::size_t j = 0; j < c.rows(); ++j) nearest[j] = nearest_point(prev, point_at(c, j));
  return mean(row_norms(sub(shifted_centers, gather_rows(prev_points, nearest))));
}

inline Var fit_loss(const Var& shifted_centers, const PointSet& prev_points) {
  return fit_loss(shifted_centers, shifted_centers.tape().constant(prev_points));
}

/// (1/N) Σ_j max(0, ‖Δc_j‖ − r).
inline Var range_loss(const Var& shifts, double layer_radius) {
  if (!(layer_radius > 0.0)) throw ArgumentError("range_loss: radius must be positive");
  if (shifts.value().cols() != 3 || shifts.value().rows() == 0) throw ShapeError("range_loss: expected [m×3] shifts");
  return mean(relu(add_scalar(row_norms(shifts), -layer_radius)));
}

/// (1/N) Σ_j (|min(0, r + Δr_j)| + max(0, Δr_j − r)).
inline Var rum_loss(const Var& deltas, double layer_radius) {
  if (!(layer_radius > 0.0)) throw ArgumentError("rum_loss: radius must be positive");
  if (deltas.value().size() == 0) throw ShapeError("rum_loss: no deltas");
  Var below = relu(scale(add_scalar(deltas, layer_radius), -1.0));
  Var above = relu(add_scalar(deltas, -layer_radius));
  return mean(add(below, above));
}

/// Loss pieces of one forward pass. Layers whose module is off contribute no entry.
struct LossTerms {
  Var ce;
  std::vector<Var> fit_per_layer;
  std::vector<Var> range_per_layer;
  std::vector<Var> rum_per_layer;
  double alpha1 = 0.01;
  double alpha2 = 0.01;
};

/// ce + α₁ Σ_L (fit + range) + α₂ Σ_L rum.
inline Var total_loss(const LossTerms& t) {
  if (t.fit_per_layer.size() != t.range_per_layer.size()) throw ShapeError("total_loss: fit/range layer counts differ");
  Var total = t.ce;
  if (!t.fit_per_layer.empty()) {
    Var csm = add(t.fit_per_layer[0], t.range_per_layer[0]);
    for (std::size_t l = 1; l < t.fit_per_layer.size(); ++l) {
      csm = add(csm, add(t.fit_per_layer[l], t.range_per_layer[l]));
    }
    total = add(total, scale(csm, t.alpha1));
  }
  if (!t.rum_per_layer.empty()) {
    Var rum = t.rum_per_layer[0];
    for (std::size_t l = 1; l < t.rum_per_layer.size(); ++l) rum = add(rum, t.rum_per_layer[l]);
    total = add(total, scale(rum, t.alpha2));
  }
  return total;
}

/// Sum of the values of a list of scalar terms.
inline double term_value(const std::vector<Var>& terms) {
  double s = 0.0;
  for (const Var& v : terms) s += v.item();
  return s;
}

}  // namespace lrl
