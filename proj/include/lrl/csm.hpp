#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrl/autodiff.hpp"
#include "lrl/geometry.hpp"
#include "lrl/nn.hpp"

namespace lrl {

enum class CsmVariant { off, csm1, csm2, csm3, csm4, csm5 };

/// Query/key relation used by the positional attention of CSM-II.
enum class Similarity { sub, sum, cat, dot, hadamard };

inline CsmVariant parse_csm_variant(std::string_view s) {
  if (s == "off") return CsmVariant::off;
  if (s == "csm1") return CsmVariant::csm1;
  if (s == "csm2") return CsmVariant::csm2;
  if (s == "csm3") return CsmVariant::csm3;
  if (s == "csm4") return CsmVariant::csm4;
  if (s == "csm5") return CsmVariant::csm5;
  throw ArgumentError("unknown CSM variant '" + std::string(s) + "'");
}

inline std::string to_string(CsmVariant v) {
  constexpr const char* names[] = {"off", "csm1", "csm2", "csm3", "csm4", "csm5"};
  return names[static_cast<int>(v)];
}

inline Similarity parse_similarity(std::string_view s) {
  if (s == "sub") return Similarity::sub;
  if (s == "sum") return Similarity::sum;
  if (s == "cat") return Similarity::cat;
  if (s == "dot") return Similarity::dot;
  if (s == "hadamard") return Similarity::hadamard;
  throw ArgumentError("unknown similarity '" + std::string(s) + "'");
}

inline std::string to_string(Similarity s) {
  constexpr const char* names[] = {"sub", "sum", "cat", "dot", "hadamard"};
  return names[static_cast<int>(s)];
}

struct CsmSettings {
  CsmVariant variant = CsmVariant::off;
  Similarity sim = Similarity::sub;
  std::size_t u = 4;  // nearest centers for CSM-III
  std::size_t k = 0;  // neighbors drawn from the 2r ball; 0 means the layer's K
};

/// One center's neighborhood: c_j, g_j and K neighbors gathered within 2r.
struct CsmNeighborhood {
  Var center;          // 1×3
  Var center_feature;  // 1×D
  Var neighbor_pos;    // K×3
  Var neighbor_feat;   // K×D
};

/// Learned transforms of the shift module. Blocks a variant does not use stay null.
struct CsmParams {
  std::size_t feature_dim = 0;
  std::size_t qk_dim = 0;
  Similarity sim = Similarity::sub;

  Mlp gamma;                 // D → D/2 → D/4 → 3, ReLU / tanh / tanh
  Dense query, key, value;   // D → D/2, linear
  Mlp phi;                   // D/2 → D, ReLU
  Dense theta_pos;           // 3 → 3, linear (CSM-II)
  Mlp vartheta;              // (3 + sim width) → 16 → 1 (CSM-II)
  Dense query_c, key_c, value_c;  // center-level attention (CSM-III/IV)
  Mlp phi_c;
  Mlp theta;                 // D → 64 → 9, read as 3×3 (CSM-IV/V)
};

inline std::size_t similarity_width(Similarity s, std::size_t qk) {
  switch (s) {
    case Similarity::cat:
      return 2 * qk;
    case Similarity::dot:
      return 1;
    default:
      return qk;
  }
}

inline CsmParams make_csm_params(ParamStore& store, const std::string& prefix, std::size_t feature_dim,
                                 const CsmSettings& settings, Rng& rng) {
  if (settings.variant == CsmVariant::off) throw ArgumentError("make_csm_params: variant is off");
  if (feature_dim == 0) throw ArgumentError("make_csm_params: zero feature dimension");
  const std::size_t d = feature_dim;
  const std::size_t h = std::max<std::size_t>(1, d / 2);
  const std::size_t q = std::max<std::size_t>(1, d / 4);
  const auto v = settings.variant;
  CsmParams p;
  p.feature_dim = d;
  p.qk_dim = h;
  p.sim = settings.sim;
  const bool uses_gamma = v == CsmVariant::csm1 || v == CsmVariant::csm2 || v == CsmVariant::csm3;
  const bool uses_attention = v != CsmVariant::csm5;
  if (uses_gamma) {
    p.gamma = make_mlp(store, prefix + ".gamma", {d, h, q, 3},
                       {Activation::relu, Activation::tanh, Activation::tanh}, rng);
  }
  if (uses_attention) {
    p.query = make_dense(store, prefix + ".query", d, h, rng, false);
    p.key = make_dense(store, prefix + ".key", d, h, rng, false);
    p.value = make_dense(store, prefix + ".value", d, h, rng, false);
    p.phi = make_mlp(store, prefix + ".phi", {h, d}, {Activation::relu}, rng);
  }
  if (v == CsmVariant::csm2) {
    p.theta_pos = make_dense(store, prefix + ".theta_pos", 3, 3, rng, false);
    p.vartheta = make_mlp(store, prefix + ".vartheta", {3 + similarity_width(settings.sim, h), 16, 1},
                          {Activation::relu, Activation::identity}, rng);
  }
  if (v == CsmVariant::csm3 || v == CsmVariant::csm4) {
    p.query_c = make_dense(store, prefix + ".query_c", d, h, rng, false);
    p.key_c = make_dense(store, prefix + ".key_c", d, h, rng, false);
    p.value_c = make_dense(store, prefix + ".value_c", d, h, rng, false);
    p.phi_c = make_mlp(store, prefix + ".phi_c", {h, d}, {Activation::relu}, rng);
  }
  if (v == CsmVariant::csm4 || v == CsmVariant::csm5) {
    p.theta = make_mlp(store, prefix + ".theta", {d, 64, 9}, {Activation::relu, Activation::identity}, rng);
  }
  return p;
}

struct Attention {
  Var output;   // 1×D aggregated feature
  Var weights;  // 1×K softmax weights
};

namespace detail {

inline void require_neighborhood(const CsmNeighborhood& nb, std::size_t d) {
  const std::size_t k = nb.neighbor_pos.value().rows();
  if (k == 0) throw ArgumentError("CSM: neighborhood needs K >= 1");
  if (nb.neighbor_feat.value().rows() != k || nb.neighbor_pos.value().cols() != 3) {
    throw ShapeError("CSM: neighbor positions/features disagree");
  }
  if (nb.neighbor_feat.value().cols() != d || nb.center_feature.value().cols() != d) {
    throw ShapeError("CSM: feature dimension mismatch, expected " + std::to_string(d));
  }
}

/// Row order sorting each segment of `k` rows by (feature row, position row).
/// Reductions over neighbors then run in an order fixed by the values alone, so a
/// shuffled neighborhood gives bitwise identical results. `pos` may be null.
inline std::vector<std::size_t> canonical_order(const Tensor& feat, const Tensor* pos, std::size_t k) {
  std::vector<std::size_t> idx(feat.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t s = 0; s < idx.size(); s += k) {
    std::stable_sort(idx.begin() + s, idx.begin() + s + k, [&](std::size_t a, std::size_t b) {
      if (int c = compare_rows(feat, a, b)) return c < 0;
      return pos != nullptr && compare_rows(*pos, a, b) < 0;
    });
  }
  return idx;
}

inline bool is_identity(const std::vector<std::size_t>& idx) {
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] != i) return false;
  return true;
}

inline CsmNeighborhood canonical(const CsmNeighborhood& nb) {
  const Tensor& f = nb.neighbor_feat.value();
  auto idx = canonical_order(f, &nb.neighbor_pos.value(), f.rows());
  if (is_identity(idx)) return nb;
  return {nb.center, nb.center_feature, gather_rows(nb.neighbor_pos, idx), gather_rows(nb.neighbor_feat, idx)};
}

/// Reorders 1×K weights computed on canonically ordered rows back to the caller's order.
inline Var caller_order(const Var& weights, const std::vector<std::size_t>& idx) {
  if (is_identity(idx)) return weights;
  std::vector<std::size_t> inv(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) inv[idx[i]] = i;
  return reshape(gather_rows(reshape(weights, {idx.size(), 1}), inv), {1, idx.size()});
}

/// Scaled dot-product attention of one query row over key/value rows, then `out`.
inline Attention attend(const Var& query_row, const Var& key_rows, const Var& value_rows, const Mlp& out,
                        std::size_t qk_dim) {
  Var scores = scale(matmul(query_row, transpose(key_rows)), 1.0 / std::sqrt(static_cast<double>(qk_dim)));
  Var a = softmax(scores);
  return {mlp_forward(out, matmul(a, value_rows)), a};
}

}  // namespace detail

/// g_sa = φ(Σ_k a_k ψ(f_k)), a = softmax(β(g)·φ_key(f)ᵀ / √d_qk).
inline Attention attention_aggregate(const Var& g, const Var& neighbor_feat, const CsmParams& p) {
  if (neighbor_feat.value().rows() == 0) throw ArgumentError("attention_aggregate: K must be >= 1");
  if (g.value().cols() != p.feature_dim || neighbor_feat.value().cols() != p.feature_dim) {
    throw ShapeError("attention_aggregate: feature dimension mismatch");
  }
  Var f = neighbor_feat;
  auto idx = detail::canonical_order(f.value(), nullptr, f.value().rows());
  if (!detail::is_identity(idx)) f = gather_rows(f, idx);
  Attention att = detail::attend(apply(p.query, g), apply(p.key, f), apply(p.value, f), p.phi, p.qk_dim);
  att.weights = detail::caller_order(att.weights, idx);
  return att;
}

/// Relation d(query, key) applied row by row.
inline Var similarity(Similarity s, const Var& queries, const Var& keys) {
  switch (s) {
    case Similarity::sub:
      return sub(queries, keys);
    case Similarity::sum:
      return add(queries, keys);
    case Similarity::cat:
      return concat_cols(queries, keys);
    case Similarity::dot:
      return sum_cols(hadamard(queries, keys));
    case Similarity::hadamard:
      return hadamard(queries, keys);
  }
  throw ArgumentError("unknown similarity");
}

/// CSM-II weights: a = softmax_k ϑ(concat[Θ(c − p_k), d(β(g), φ_key(f_k))]); no √d_qk scaling.
inline Attention attention_aggregate_positional(const CsmNeighborhood& nb_in, const CsmParams& p, Similarity sim) {
  detail::require_neighborhood(nb_in, p.feature_dim);
  const auto idx = detail::canonical_order(nb_in.neighbor_feat.value(), &nb_in.neighbor_pos.value(),
                                           nb_in.neighbor_pos.value().rows());
  const CsmNeighborhood nb = detail::canonical(nb_in);
  if (p.vartheta.empty() || p.theta_pos.weight == nullptr) throw ArgumentError("positional attention needs CSM-II params");
  if (p.vartheta.in_dim() != 3 + similarity_width(sim, p.qk_dim)) {
    throw ArgumentError("similarity '" + to_string(sim) + "' does not match the width ϑ was built for");
  }
  const std::size_t k = nb.neighbor_pos.value().rows();
  Var rel = sub(repeat_rows(nb.center, k), nb.neighbor_pos);
  Var delta = apply(p.theta_pos, rel);
  Var queries = repeat_rows(apply(p.query, nb.center_feature), k);
  Var keys = apply(p.key, nb.neighbor_feat);
  Var logits = mlp_forward(p.vartheta, concat_cols(delta, similarity(sim, queries, keys)));
  Var a = softmax(reshape(logits, {1, k}));
  return {mlp_forward(p.phi, matmul(a, apply(p.value, nb.neighbor_feat))), detail::caller_order(a, idx)};
}

/// Δc = (1/K) Σ_k γ(ĝ − f_k) ⊙ (c − p_k).
inline Var displacement(const Var& g_hat, const CsmNeighborhood& nb_in, const CsmParams& p) {
  const CsmNeighborhood nb = detail::canonical(nb_in);
  const std::size_t k = nb.neighbor_pos.value().rows();
  Var weights = mlp_forward(p.gamma, sub(repeat_rows(g_hat, k), nb.neighbor_feat));
  Var rel = sub(repeat_rows(nb.center, k), nb.neighbor_pos);
  return mean_rows(hadamard(weights, rel));
}

inline Var csm1_shift(const CsmNeighborhood& nb_in, const CsmParams& p) {
  detail::require_neighborhood(nb_in, p.feature_dim);
  const CsmNeighborhood nb = detail::canonical(nb_in);
  Attention att = attention_aggregate(nb.center_feature, nb.neighbor_feat, p);
  return displacement(add(nb.center_feature, att.output), nb, p);
}

inline Var csm2_shift(const CsmNeighborhood& nb_in, const CsmParams& p, Similarity sim) {
  detail::require_neighborhood(nb_in, p.feature_dim);
  const CsmNeighborhood nb = detail::canonical(nb_in);
  Attention att = attention_aggregate_positional(nb, p, sim);
  return displacement(add(nb.center_feature, att.output), nb, p);
}

/// ḡ_j = g_j + g_j^sa for every center, plus the g^sa terms themselves.
struct CenterFeatures {
  std::vector<Var> g_sa;
  Var g_bar;  // m×D
};

inline CenterFeatures updated_center_features(std::span<const CsmNeighborhood> regions, const CsmParams& p) {
  CenterFeatures cf;
  std::vector<Var> bars;
  for (const auto& nb : regions) {
    detail::require_neighborhood(nb, p.feature_dim);
    Attention att = attention_aggregate(nb.center_feature, nb.neighbor_feat, p);
    cf.g_sa.push_back(att.output);
    bars.push_back(add(nb.center_feature, att.output));
  }
  cf.g_bar = stack_rows(bars);
  return cf;
}

/// g^saC = φ̃(Σ_u b_u ψ̃(ḡ_u)), b = softmax(β̃(ḡ_j)·φ̃_key(ḡ_u)ᵀ / √d_qk) over the given rows.
inline Attention center_attention(const Var& g_bar_j, const Var& other_bars, const CsmParams& p) {
  return detail::attend(apply(p.query_c, g_bar_j), apply(p.key_c, other_bars), apply(p.value_c, other_bars), p.phi_c,
                        p.qk_dim);
}

inline Tensor center_positions(std::span<const CsmNeighborhood> regions) {
  Tensor c = Tensor::matrix(regions.size(), 3);
  for (std::size_t j = 0; j < regions.size(); ++j)
    for (std::size_t a = 0; a < 3; ++a) c(j, a) = regions[j].center.value().data[a];
  return c;
}

/// CSM-III shift of center j given precomputed ḡ; ĝ_j = g_j^sa + g_j^saC.
inline Var csm3_shift(std::span<const CsmNeighborhood> regions, const CenterFeatures& cf, std::size_t j,
                      const CsmParams& p, std::size_t u) {
  if (j >= regions.size()) throw ArgumentError("csm3_shift: center index out of range");
  const auto near = k_nearest_centers(center_positions(regions), j, u);
  Attention sac = center_attention(row(cf.g_bar, j), gather_rows(cf.g_bar, near), p);
  return displacement(add(cf.g_sa[j], sac.output), regions[j], p);
}

inline std::vector<Var> csm3_shifts(std::span<const CsmNeighborhood> regions, const CsmParams& p, std::size_t u) {
  if (u == 0 || u >= regions.size()) {
    throw ArgumentError("csm3: need 1 <= U <= m-1, got U=" + std::to_string(u) + " m=" + std::to_string(regions.size()));
  }
  CenterFeatures cf = updated_center_features(regions, p);
  std::vector<Var> out;
  for (std::size_t j = 0; j < regions.size(); ++j) out.push_back(csm3_shift(regions, cf, j, p, u));
  return out;
}

/// ĝ for every center with the center attention running over all m centers.
inline Var global_center_features(std::span<const CsmNeighborhood> regions, const CsmParams& p) {
  CenterFeatures cf = updated_center_features(regions, p);
  std::vector<Var> hats;
  for (std::size_t j = 0; j < regions.size(); ++j) {
    Attention sac = center_attention(row(cf.g_bar, j), cf.g_bar, p);
    hats.push_back(add(cf.g_sa[j], sac.output));
  }
  return stack_rows(hats);
}

/// Δc_j = (1/m) Σ_l θ(ĝ_j − ĝ_l)(c_j − c_l), θ's 9 outputs read as a row-major 3×3.
inline Var csm4_shift(const Var& centers, const Var& g_hat, std::size_t j, const CsmParams& p) {
  const std::size_t m = centers.value().rows();
  Var mats = mlp_forward(p.theta, sub(repeat_rows(row(g_hat, j), m), g_hat));
  Var rel = sub(repeat_rows(row(centers, j), m), centers);
  return mean_rows(batched_matvec3(mats, rel));
}

inline std::vector<Var> csm4_shifts(std::span<const CsmNeighborhood> regions, const CsmParams& p) {
  if (regions.size() < 2) throw ArgumentError("csm4: need at least two centers");
  Var g_hat = global_center_features(regions, p);
  std::vector<Var> cs;
  for (const auto& nb : regions) cs.push_back(nb.center);
  Var centers = stack_rows(cs);
  std::vector<Var> out;
  for (std::size_t j = 0; j < regions.size(); ++j) out.push_back(csm4_shift(centers, g_hat, j, p));
  return out;
}

/// Δc = componentwise max_k (1/K) Σ_l θ(f_k − f_l)(p_k − p_l).
inline Var csm5_shift(const CsmNeighborhood& nb_in, const CsmParams& p) {
  detail::require_neighborhood(nb_in, p.feature_dim);
  const CsmNeighborhood nb = detail::canonical(nb_in);
  const std::size_t k = nb.neighbor_pos.value().rows();
  std::vector<std::size_t> first, second;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      first.push_back(a);
      second.push_back(b);
    }
  Var fdiff = sub(gather_rows(nb.neighbor_feat, first), gather_rows(nb.neighbor_feat, second));
  Var pdiff = sub(gather_rows(nb.neighbor_pos, first), gather_rows(nb.neighbor_pos, second));
  Var pair_shift = batched_matvec3(mlp_forward(p.theta, fdiff), pdiff);
  return max_rows(segment_mean_rows(pair_shift, k));
}

/// Every center's neighborhood stacked: rows j·K … j·K+K−1 belong to center j.
struct CsmBatch {
  Var centers;         // m×3
  Var center_feature;  // m×D
  Var neighbor_pos;    // m·K×3
  Var neighbor_feat;   // m·K×D
  std::size_t k = 0;
};

/// CSM-I for all centers at once; bitwise equal to csm1_shift per center.
inline Var csm1_shifts(const CsmBatch& b, const CsmParams& p) {
  const std::size_t m = b.centers.value().rows();
  const std::size_t k = b.k;
  if (m == 0 || k == 0) throw ArgumentError("csm1_shifts: need m >= 1 and K >= 1");
  if (b.neighbor_pos.value().rows() != m * k || b.neighbor_feat.value().rows() != m * k) {
    throw ShapeError("csm1_shifts: expected m·K neighbor rows");
  }
  if (b.center_feature.value().cols() != p.feature_dim || b.neighbor_feat.value().cols() != p.feature_dim) {
    throw ShapeError("csm1_shifts: feature dimension mismatch");
  }
  std::vector<std::size_t> owner(m * k);
  for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / k;
  Var nfeat = b.neighbor_feat, npos = b.neighbor_pos;
  auto idx = detail::canonical_order(nfeat.value(), &npos.value(), k);
  if (!detail::is_identity(idx)) {
    nfeat = gather_rows(nfeat, idx);
    npos = gather_rows(npos, idx);
  }
  Var keys = apply(p.key, nfeat);
  Var values = apply(p.value, nfeat);
  Var queries = gather_rows(apply(p.query, b.center_feature), owner);
  Var scores = scale(sum_cols(hadamard(queries, keys)), 1.0 / std::sqrt(static_cast<double>(p.qk_dim)));
  Var a = reshape(softmax(reshape(scores, {m, k})), {m * k, 1});
  Var g_sa = mlp_forward(p.phi, segment_sum_rows(mul_rows(values, a), k));
  Var g_hat = add(b.center_feature, g_sa);
  Var weights = mlp_forward(p.gamma, sub(gather_rows(g_hat, owner), nfeat));
  Var rel = sub(gather_rows(b.centers, owner), npos);
  return segment_mean_rows(hadamard(weights, rel), k);
}

/// All shifts of a layer as an m×3 matrix.
inline Var csm_layer_shifts(std::span<const CsmNeighborhood> regions, const CsmParams& p, const CsmSettings& s) {
  std::vector<Var> shifts;
  switch (s.variant) {
    case CsmVariant::csm1:
      for (const auto& nb : regions) shifts.push_back(csm1_shift(nb, p));
      break;
    case CsmVariant::csm2:
      for (const auto& nb : regions) shifts.push_back(csm2_shift(nb, p, s.sim));
      break;
    case CsmVariant::csm3:
      shifts = csm3_shifts(regions, p, s.u);
      break;
    case CsmVariant::csm4:
      shifts = csm4_shifts(regions, p);
      break;
    case CsmVariant::csm5:
      for (const auto& nb : regions) shifts.push_back(csm5_shift(nb, p));
      break;
    case CsmVariant::off:
      throw ArgumentError("csm_layer_shifts: variant is off");
  }
  return stack_rows(shifts);
}

}  // namespace lrl
