#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lrl/autodiff.hpp"
#include "lrl/geometry.hpp"
#include "lrl/nn.hpp"

namespace lrl {

enum class RumVariant { off, rum1, rum2 };

/// How transformed feature differences are pooled within a shell.
enum class ShellAggregation { cum, max };

inline RumVariant parse_rum_variant(std::string_view s) {
  if (s == "off") return RumVariant::off;
  if (s == "rum1") return RumVariant::rum1;
  if (s == "rum2") return RumVariant::rum2;
  throw ArgumentError("unknown RUM variant '" + std::string(s) + "'");
}

inline std::string to_string(RumVariant v) {
  constexpr const char* names[] = {"off", "rum1", "rum2"};
  return names[static_cast<int>(v)];
}

inline ShellAggregation parse_aggregation(std::string_view s) {
  if (s == "cum") return ShellAggregation::cum;
  if (s == "max") return ShellAggregation::max;
  throw ArgumentError("unknown shell aggregation '" + std::string(s) + "'");
}

inline std::string to_string(ShellAggregation a) { return a == ShellAggregation::cum ? "cum" : "max"; }

struct RumSettings {
  RumVariant variant = RumVariant::off;
  ShellAggregation agg = ShellAggregation::max;
  std::size_t shells = 4;
  std::size_t max_neighbors = 64;
  // Multiply the tanh head by r so that |Δr| < r.
  bool scale_by_radius = true;
};

struct RumParams {
  std::size_t embed_dim = 0;
  std::size_t shells = 0;
  Mlp zeta;                  // D → E, ReLU
  Mlp head;                  // T·E → T·E/2 → 1, ReLU / tanh
  Dense query, key, value;   // E → E, linear (RUM-II)
};

inline RumParams make_rum_params(ParamStore& store, const std::string& prefix, std::size_t feature_dim,
                                 const RumSettings& s, Rng& rng) {
  if (s.variant == RumVariant::off) throw ArgumentError("make_rum_params: variant is off");
  if (s.shells == 0) throw ArgumentError("make_rum_params: need T >= 1");
  RumParams p;
  p.embed_dim = std::max<std::size_t>(1, feature_dim / 2);
  p.shells = s.shells;
  const std::size_t flat = p.shells * p.embed_dim;
  p.zeta = make_mlp(store, prefix + ".zeta", {feature_dim, p.embed_dim}, {Activation::relu}, rng);
  p.head = make_mlp(store, prefix + ".head", {flat, std::max<std::size_t>(1, flat / 2), 1},
                    {Activation::relu, Activation::tanh}, rng);
  if (s.variant == RumVariant::rum2) {
    p.query = make_dense(store, prefix + ".query", p.embed_dim, p.embed_dim, rng, false);
    p.key = make_dense(store, prefix + ".key", p.embed_dim, p.embed_dim, rng, false);
    p.value = make_dense(store, prefix + ".value", p.embed_dim, p.embed_dim, rng, false);
  }
  return p;
}

/// Neighbors gathered within 2r of a center, split into concentric shells.
struct RumContext {
  Var center_feature;  // 1×D
  Var neighbor_feat;   // S×D, S may be 0
  ShellPartition shells;
  double radius = 0.0;  // r (the ball has radius 2r)
};

/// T×E matrix: row t pools ζ(g − f_s) over shell t by mean or max; empty shells are zero rows.
inline Var shell_features(const RumContext& ctx, const RumParams& p, ShellAggregation agg) {
  Tape& tape = ctx.center_feature.tape();
  const std::size_t s = ctx.neighbor_feat.value().rows();
  if (ctx.shells.shells() != p.shells) throw ShapeError("shell_features: shell count differs from parameters");
  if (ctx.shells.shell_of.size() != s) throw ShapeError("shell_features: partition does not cover the neighbors");
  Var embedded;
  if (s > 0) embedded = mlp_forward(p.zeta, sub(repeat_rows(ctx.center_feature, s), ctx.neighbor_feat));
  std::vector<Var> rows;
  for (std::size_t t = 0; t < p.shells; ++t) {
    const auto& members = ctx.shells.members[t];
    if (members.empty()) {
      rows.push_back(tape.constant(Tensor::matrix(1, p.embed_dim)));
      continue;
    }
    // Members in feature order, so the shell mean does not depend on neighbor order.
    std::vector<std::size_t> sorted = members;
    const Tensor& f = ctx.neighbor_feat.value();
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return compare_rows(f, a, b) < 0; });
    Var in_shell = gather_rows(embedded, sorted);
    rows.push_back(agg == ShellAggregation::cum ? mean_rows(in_shell) : max_rows(in_shell));
  }
  return stack_rows(rows);
}

struct ShellAttention {
  Var refined;  // R + R^sa, T×E
  Var weights;  // T×T, rows sum to 1
};

/// R^sa_t = Σ_v a_{t,v} ψ̂(R_v), a_t = softmax_v(β̂(R_t)·φ̂(R_v)ᵀ / √E).
inline ShellAttention shell_attention(const Var& shells, const RumParams& p) {
  Var q = apply(p.query, shells);
  Var k = apply(p.key, shells);
  Var v = apply(p.value, shells);
  Var a = softmax(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(p.embed_dim))));
  return {add(shells, matmul(a, v)), a};
}

inline Var radius_head(const Var& shells, const RumParams& p, double radius, bool scale_by_radius) {
  const std::size_t n = shells.value().size();
  Var out = mlp_forward(p.head, reshape(shells, {1, n}));
  // tanh rounds to exactly ±1 for large inputs; one ulp less than r keeps |Δr| < r strict.
  return scale_by_radius ? scale(out, radius * (1.0 - 0x1.0p-52)) : out;
}

/// Δr from the flattened shell matrix (rows in order inner to outer).
inline Var rum1_delta(const RumContext& ctx, const RumParams& p, ShellAggregation agg, bool scale_by_radius = true) {
  return radius_head(shell_features(ctx, p, agg), p, ctx.radius, scale_by_radius);
}

inline Var rum2_delta(const RumContext& ctx, const RumParams& p, ShellAggregation agg, bool scale_by_radius = true) {
  if (p.query.weight == nullptr) throw ArgumentError("rum2_delta: parameters built without attention maps");
  return radius_head(shell_attention(shell_features(ctx, p, agg), p).refined, p, ctx.radius, scale_by_radius);
}

inline Var rum_delta(const RumContext& ctx, const RumParams& p, const RumSettings& s) {
  switch (s.variant) {
    case RumVariant::rum1:
      return rum1_delta(ctx, p, s.agg, s.scale_by_radius);
    case RumVariant::rum2:
      return rum2_delta(ctx, p, s.agg, s.scale_by_radius);
    case RumVariant::off:
      break;
  }
  throw ArgumentError("rum_delta: variant is off");
}

}  // namespace lrl
