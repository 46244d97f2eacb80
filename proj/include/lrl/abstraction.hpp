#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lrl/autodiff.hpp"
#include "lrl/csm.hpp"
#include "lrl/geometry.hpp"
#include "lrl/loss.hpp"
#include "lrl/nn.hpp"
#include "lrl/rum.hpp"

namespace lrl {

struct LayerConfig {
  std::size_t n_centers = 128;
  double radius = 0.2;
  std::size_t k = 16;
  std::vector<std::size_t> mlp = {64};
  CsmSettings csm;
  RumSettings rum;
};

struct ModelConfig {
  std::size_t input_dim = 3;  // per-point input features: x, y, z
  std::vector<LayerConfig> layers = default_layers();
  std::vector<std::size_t> global_mlp = {256};
  std::vector<std::size_t> head = {128};  // hidden widths before the C logits
  std::size_t num_classes = 3;

  static std::vector<LayerConfig> default_layers() {
    LayerConfig l1;
    l1.n_centers = 128;
    l1.radius = 0.2;
    l1.k = 16;
    l1.mlp = {64};
    LayerConfig l2;
    l2.n_centers = 32;
    l2.radius = 0.4;
    l2.k = 16;
    l2.mlp = {128};
    return {l1, l2};
  }

  /// Throws ArgumentError on inconsistent sizes.
  void validate() const {
    if (layers.empty()) throw ArgumentError("model needs at least one set abstraction layer");
    if (num_classes < 2) throw ArgumentError("model needs at least two classes");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& lc = layers[l];
      const std::string name = "layer" + std::to_string(l + 1);
      if (lc.n_centers == 0 || lc.k == 0 || lc.mlp.empty()) throw ArgumentError(name + ": centers, k and mlp must be nonzero");
      if (!(lc.radius > 0.0)) throw ArgumentError(name + ": radius must be positive");
      if (l > 0 && lc.n_centers >= layers[l - 1].n_centers) {
        throw ArgumentError(name + ": center count must decrease across layers");
      }
      if (lc.csm.variant == CsmVariant::csm3 && (lc.csm.u == 0 || lc.csm.u >= lc.n_centers)) {
        throw ArgumentError(name + ": csm3 needs 1 <= u < centers");
      }
      if (lc.csm.variant == CsmVariant::csm4 && lc.n_centers < 2) throw ArgumentError(name + ": csm4 needs two centers");
      if (lc.rum.variant != RumVariant::off && (lc.rum.shells == 0 || lc.rum.max_neighbors == 0)) {
        throw ArgumentError(name + ": rum needs shells >= 1 and max_neighbors >= 1");
      }
    }
    if (global_mlp.empty()) throw ArgumentError("global mlp must have at least one layer");
  }
};

struct LayerParams {
  Mlp features;
  std::optional<CsmParams> csm;
  std::optional<RumParams> rum;
};

/// Parameters of the full classifier. Not copyable: layers point into the store.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed) : config_(std::move(cfg)) {
    config_.validate();
    Rng rng(derive_seed({seed, 0x1417}));
    std::size_t dim = config_.input_dim;
    for (std::size_t l = 0; l < config_.layers.size(); ++l) {
      const LayerConfig& lc = config_.layers[l];
      const std::string prefix = "sa" + std::to_string(l + 1);
      LayerParams lp;
      std::vector<std::size_t> widths{dim + 3};
      widths.insert(widths.end(), lc.mlp.begin(), lc.mlp.end());
      lp.features = make_mlp(store_, prefix + ".mlp", widths, std::vector(lc.mlp.size(), Activation::relu), rng);
      if (lc.csm.variant != CsmVariant::off) lp.csm = make_csm_params(store_, prefix + ".csm", dim, lc.csm, rng);
      if (lc.rum.variant != RumVariant::off) lp.rum = make_rum_params(store_, prefix + ".rum", dim, lc.rum, rng);
      layers_.push_back(std::move(lp));
      dim = lc.mlp.back();
    }
    std::vector<std::size_t> gw{dim + 3};
    gw.insert(gw.end(), config_.global_mlp.begin(), config_.global_mlp.end());
    global_ = make_mlp(store_, "global.mlp", gw, std::vector(config_.global_mlp.size(), Activation::relu), rng);
    std::vector<std::size_t> hw{gw.back()};
    hw.insert(hw.end(), config_.head.begin(), config_.head.end());
    hw.push_back(config_.num_classes);
    std::vector<Activation> acts(hw.size() - 1, Activation::relu);
    acts.back() = Activation::identity;
    head_ = make_mlp(store_, "head", hw, acts, rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const std::vector<LayerParams>& layers() const { return layers_; }
  const Mlp& global_mlp() const { return global_; }
  const Mlp& head() const { return head_; }

 private:
  ModelConfig config_;
  ParamStore store_;
  std::vector<LayerParams> layers_;
  Mlp global_;
  Mlp head_;
};

/// Points and per-point features flowing between layers.
struct LayerState {
  Var positions;  // N×3
  Var features;   // N×D
};

/// What one set abstraction layer did, for the loss and for region dumps.
struct RegionRecord {
  std::size_t layer = 0;
  double base_radius = 0.0;
  RegionSet regions;                   // shifted centers, final radii, groups
  std::vector<std::size_t> fps_indices;
  Tensor shifts;                       // m×3, zero when CSM is off
  std::vector<double> radius_deltas;   // zero when RUM is off
  std::vector<bool> fallback;          // group came from the nearest-point fallback
  std::size_t fallback_count = 0;
  PointSet prev_points;                // previous layer positions
  Var prev_var;                        // the same, on the tape
  Var shift_var;                       // m×3, invalid when CSM is off
  Var shifted_centers;                 // m×3
  Var delta_var;                       // m×1, invalid when RUM is off
};

struct SetAbstractionOutput {
  LayerState state;
  RegionRecord record;
};

/// Purpose tags mixed into per-region sampling seeds.
enum class SamplePurpose : std::uint64_t { csm = 1, rum = 2, group = 3 };

inline Rng region_rng(std::uint64_t sample_seed, std::size_t layer, std::size_t region, SamplePurpose purpose) {
  return Rng(derive_seed({sample_seed, layer, region, static_cast<std::uint64_t>(purpose)}));
}

/// Sample centers by FPS, optionally shift them (CSM) and resize their balls (RUM),
/// group K points per center, run the per-point MLP on [feature, p − ĉ] and max-pool.
inline SetAbstractionOutput set_abstraction(const LayerState& in, std::size_t layer_index, const LayerConfig& cfg,
                                            const LayerParams& params, std::uint64_t sample_seed) {
  const Tensor& pos = in.positions.value();
  if (pos.rows() < cfg.n_centers) {
    throw ArgumentError("set_abstraction: " + std::to_string(pos.rows()) + " points cannot supply " +
                        std::to_string(cfg.n_centers) + " centers");
  }
  const std::size_t m = cfg.n_centers;
  SetAbstractionOutput out;
  RegionRecord& rec = out.record;
  rec.layer = layer_index;
  rec.base_radius = cfg.radius;
  rec.prev_points = pos;
  rec.prev_var = in.positions;
  rec.fps_indices = farthest_point_sample(pos, m, 0);

  Var centers = gather_rows(in.positions, rec.fps_indices);
  Var center_feats = gather_rows(in.features, rec.fps_indices);
  Var shifted = centers;
  rec.shifts = Tensor::matrix(m, 3);

  if (cfg.csm.variant != CsmVariant::off) {
    const std::size_t k_csm = cfg.csm.k ? cfg.csm.k : cfg.k;
    std::vector<std::vector<std::size_t>> near(m);
    for (std::size_t j = 0; j < m; ++j) {
      Rng rng = region_rng(sample_seed, layer_index, j, SamplePurpose::csm);
      near[j] = ball_query_or_nearest(pos, point_at(centers.value(), j), 2.0 * cfg.radius, k_csm, rng).indices;
    }
    if (cfg.csm.variant == CsmVariant::csm1) {
      std::vector<std::size_t> flat;
      flat.reserve(m * k_csm);
      for (const auto& g : near) flat.insert(flat.end(), g.begin(), g.end());
      rec.shift_var = csm1_shifts(
          {centers, center_feats, gather_rows(in.positions, flat), gather_rows(in.features, flat), k_csm}, *params.csm);
    } else {
      std::vector<CsmNeighborhood> nbs;
      nbs.reserve(m);
      for (std::size_t j = 0; j < m; ++j) {
        nbs.push_back({row(centers, j), row(center_feats, j), gather_rows(in.positions, near[j]),
                       gather_rows(in.features, near[j])});
      }
      rec.shift_var = csm_layer_shifts(nbs, *params.csm, cfg.csm);
    }
    rec.shifts = rec.shift_var.value();
    shifted = add(centers, rec.shift_var);
  }
  rec.shifted_centers = shifted;

  std::vector<double> radii(m, cfg.radius);
  rec.radius_deltas.assign(m, 0.0);
  if (cfg.rum.variant != RumVariant::off) {
    std::vector<Var> deltas;
    deltas.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Vec3 c = point_at(shifted.value(), j);
      Rng rng = region_rng(sample_seed, layer_index, j, SamplePurpose::rum);
      auto members = ball_members(pos, c, 2.0 * cfg.radius, cfg.rum.max_neighbors, rng);
      RumContext ctx{row(center_feats, j), gather_rows(in.features, members),
                     shell_partition(pos, members, c, 2.0 * cfg.radius, cfg.rum.shells), cfg.radius};
      Var d = rum_delta(ctx, *params.rum, cfg.rum);
      rec.radius_deltas[j] = d.item();
      // Only reachable without radius scaling; the nearest-point fallback then applies.
      radii[j] = std::max(cfg.radius + d.item(), 1e-12);
      deltas.push_back(d);
    }
    rec.delta_var = stack_rows(deltas);
  }

  std::vector<std::size_t> all_idx;
  std::vector<std::size_t> owner;
  all_idx.reserve(m * cfg.k);
  owner.reserve(m * cfg.k);
  rec.fallback.assign(m, false);
  rec.regions.centers = shifted.value();
  rec.regions.center_feature_idx = rec.fps_indices;
  rec.regions.radii = radii;
  for (std::size_t j = 0; j < m; ++j) {
    Rng rng = region_rng(sample_seed, layer_index, j, SamplePurpose::group);
    auto br = ball_query_or_nearest(pos, point_at(shifted.value(), j), radii[j], cfg.k, rng);
    rec.fallback[j] = br.fallback;
    rec.fallback_count += br.fallback ? 1 : 0;
    all_idx.insert(all_idx.end(), br.indices.begin(), br.indices.end());
    owner.insert(owner.end(), cfg.k, j);
    rec.regions.groups.push_back(std::move(br.indices));
  }

  Var grouped = gather_rows(in.features, all_idx);
  Var rel = sub(gather_rows(in.positions, all_idx), gather_rows(shifted, owner));
  Var h = mlp_forward(params.features, concat_cols(grouped, rel));
  out.state = {shifted, segment_max_rows(h, cfg.k)};
  return out;
}

/// Midpoint of the bounding box; depends on the point set, not its multiplicities.
/// Differentiable, so shifted centers feeding the global layer get the full gradient.
inline Var bounding_center(const Var& pos) {
  Var hi = max_rows(pos);
  Var lo = scale(max_rows(scale(pos, -1.0)), -1.0);
  return scale(add(lo, hi), 0.5);
}

/// One region covering every point: MLP on [feature, p − center] then channelwise max.
inline Var global_abstraction(const LayerState& state, const Mlp& mlp) {
  const Tensor& pos = state.positions.value();
  if (pos.rows() == 0) throw ArgumentError("global_abstraction: empty state");
  Var center = bounding_center(state.positions);
  Var rel = sub(state.positions, repeat_rows(center, pos.rows()));
  return max_rows(mlp_forward(mlp, concat_cols(state.features, rel)));
}

struct ClassifyOutput {
  Var logits;  // 1×C, pre-softmax
  std::vector<RegionRecord> records;
};

inline ClassifyOutput classify(Tape& tape, const PointSet& cloud, const Model& model, std::uint64_t sample_seed) {
  const ModelConfig& cfg = model.config();
  require_points(cloud, "classify");
  if (cloud.rows() < cfg.layers.front().n_centers) {
    throw ArgumentError("classify: cloud has " + std::to_string(cloud.rows()) + " points, first layer needs " +
                        std::to_string(cfg.layers.front().n_centers));
  }
  if (cfg.input_dim != 3) throw ArgumentError("classify: model expects xyz input features");
  ClassifyOutput out;
  LayerState state{tape.constant(cloud), tape.constant(cloud)};
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    auto sa = set_abstraction(state, l, cfg.layers[l], model.layers()[l], sample_seed);
    state = sa.state;
    out.records.push_back(std::move(sa.record));
  }
  out.logits = mlp_forward(model.head(), global_abstraction(state, model.global_mlp()));
  return out;
}

/// Cross-entropy plus the regularizers of every layer whose module is on.
inline LossTerms assemble_loss(const ClassifyOutput& fwd, std::size_t label, double alpha1, double alpha2) {
  LossTerms t;
  t.alpha1 = alpha1;
  t.alpha2 = alpha2;
  t.ce = cross_entropy(fwd.logits, label);
  for (const auto& rec : fwd.records) {
    if (rec.shift_var.valid()) {
      t.fit_per_layer.push_back(fit_loss(rec.shifted_centers, rec.prev_var));
      t.range_per_layer.push_back(range_loss(rec.shift_var, rec.base_radius));
    }
    if (rec.delta_var.valid()) t.rum_per_layer.push_back(rum_loss(rec.delta_var, rec.base_radius));
  }
  return t;
}

}  // namespace lrl
