#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lrl/errors.hpp"
#include "lrl/rng.hpp"
#include "lrl/tensor.hpp"

namespace lrl {

using Vec3 = std::array<double, 3>;

/// Point coordinates as an [n×3] tensor.
using PointSet = Tensor;

inline Vec3 point_at(const Tensor& pts, std::size_t i) {
  return {pts.data[i * 3], pts.data[i * 3 + 1], pts.data[i * 3 + 2]};
}

inline double squared_distance(const Tensor& pts, std::size_t i, const Vec3& c) {
  const double dx = pts.data[i * 3] - c[0];
  const double dy = pts.data[i * 3 + 1] - c[1];
  const double dz = pts.data[i * 3 + 2] - c[2];
  return dx * dx + dy * dy + dz * dz;
}

inline void require_points(const Tensor& pts, const char* op) {
  if (pts.rank() != 2 || pts.cols() != 3) throw ShapeError(std::string(op) + ": expected [n×3] points, got " + pts.shape_str());
  if (pts.rows() == 0) throw ArgumentError(std::string(op) + ": empty point set");
}

/// Regions formed around centers of a source point set.
struct RegionSet {
  Tensor centers;                                   // m×3, possibly shifted
  std::vector<std::size_t> center_feature_idx;      // source index each center was sampled from
  std::vector<double> radii;                        // per-center radius
  std::vector<std::vector<std::size_t>> groups;     // m lists of exactly K source indices

  std::size_t size() const { return groups.size(); }

  /// Checks index validity, radius positivity and the radius predicate.
  /// Groups produced by the nearest-point fallback are listed in `fallback`.
  bool consistent_with(const Tensor& source, const std::vector<bool>& fallback = {}) const {
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (!(radii[j] > 0.0) || center_feature_idx[j] >= source.rows()) return false;
      const Vec3 c = point_at(centers, j);
      for (std::size_t i : groups[j]) {
        if (i >= source.rows()) return false;
        const bool fb = !fallback.empty() && fallback[j];
        if (!fb && squared_distance(source, i, c) > radii[j] * radii[j]) return false;
      }
    }
    return true;
  }
};

/// Greedy max-min sampling starting from `seed_index`. Ties go to the lowest index;
/// selected points are never re-selected, so m == n yields a permutation.
inline std::vector<std::size_t> farthest_point_sample(const PointSet& points, std::size_t m, std::size_t seed_index) {
  require_points(points, "farthest_point_sample");
  const std::size_t n = points.rows();
  if (m == 0 || m > n) {
    throw ArgumentError("farthest_point_sample: need 1 <= m <= n, got m=" + std::to_string(m) + " n=" + std::to_string(n));
  }
  if (seed_index >= n) throw ArgumentError("farthest_point_sample: seed index out of range");
  std::vector<std::size_t> out;
  out.reserve(m);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t cur = seed_index;
  for (std::size_t s = 0; s < m; ++s) {
    out.push_back(cur);
    min_d[cur] = -1.0;
    if (s + 1 == m) break;
    const Vec3 c = point_at(points, cur);
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] < 0.0) continue;
      min_d[i] = std::min(min_d[i], squared_distance(points, i, c));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    cur = best;
  }
  return out;
}

namespace detail {

/// Indices within `radius` of `center`, ordered by (distance, x, y, z, index).
/// The order depends only on coordinates, so a permuted input yields the same
/// candidate geometry in the same order.
inline std::vector<std::size_t> ball_candidates(const PointSet& points, const Vec3& center, double radius) {
  const double r2 = radius * radius;
  std::vector<std::size_t> cand;
  std::vector<double> d2(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    d2[i] = squared_distance(points, i, center);
    if (d2[i] <= r2) cand.push_back(i);
  }
  std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    for (std::size_t k = 0; k < 3; ++k) {
      if (points.data[a * 3 + k] != points.data[b * 3 + k]) return points.data[a * 3 + k] < points.data[b * 3 + k];
    }
    return a < b;
  });
  return cand;
}

}  // namespace detail

/// All points within `radius` of `center`, at most `cap` of them drawn uniformly
/// without replacement. No padding.
inline std::vector<std::size_t> ball_members(const PointSet& points, const Vec3& center, double radius, std::size_t cap,
                                             Rng& rng) {
  require_points(points, "ball_members");
  std::vector<std::size_t> cand = detail::ball_candidates(points, center, radius);
  if (cand.size() > cap) {
    for (std::size_t i = 0; i < cap; ++i) std::swap(cand[i], cand[i + rng.index(cand.size() - i)]);
    cand.resize(cap);
  }
  return cand;
}

/// K indices with ‖p − center‖ ≤ radius. More than k candidates: uniform sample
/// without replacement. Fewer: candidates repeated cyclically up to k.
inline std::vector<std::size_t> ball_query(const PointSet& points, const Vec3& center, double radius, std::size_t k,
                                           Rng& rng) {
  require_points(points, "ball_query");
  if (!(radius > 0.0)) throw ArgumentError("ball_query: radius must be positive");
  if (k == 0) throw ArgumentError("ball_query: k must be >= 1");
  std::vector<std::size_t> cand = detail::ball_candidates(points, center, radius);
  if (cand.empty()) throw EmptyRegionError("ball_query: no points within radius " + std::to_string(radius));
  if (cand.size() >= k) {
    if (cand.size() > k) {
      for (std::size_t i = 0; i < k; ++i) std::swap(cand[i], cand[i + rng.index(cand.size() - i)]);
    }
    cand.resize(k);
    return cand;
  }
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = cand[i % cand.size()];
  return out;
}

/// Index of the point nearest to `c`; ties to the lowest index.
inline std::size_t nearest_point(const PointSet& points, const Vec3& c) {
  require_points(points, "nearest_point");
  std::size_t best = 0;
  double best_d = squared_distance(points, 0, c);
  for (std::size_t i = 1; i < points.rows(); ++i) {
    const double d = squared_distance(points, i, c);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct BallResult {
  std::vector<std::size_t> indices;
  bool fallback = false;
};

/// ball_query, falling back to the nearest point repeated k times for an empty ball.
inline BallResult ball_query_or_nearest(const PointSet& points, const Vec3& center, double radius, std::size_t k,
                                        Rng& rng) {
  try {
    return {ball_query(points, center, radius, k, rng), false};
  } catch (const EmptyRegionError&) {
    return {std::vector<std::size_t>(k, nearest_point(points, center)), true};
  }
}

/// The u centers nearest to center j (j excluded), closest first, ties by index.
inline std::vector<std::size_t> k_nearest_centers(const Tensor& centers, std::size_t j, std::size_t u) {
  require_points(centers, "k_nearest_centers");
  const std::size_t m = centers.rows();
  if (j >= m) throw ArgumentError("k_nearest_centers: center index out of range");
  if (u >= m) throw ArgumentError("k_nearest_centers: u=" + std::to_string(u) + " needs u <= m-1 with m=" + std::to_string(m));
  const Vec3 c = point_at(centers, j);
  std::vector<std::size_t> idx;
  idx.reserve(m - 1);
  for (std::size_t i = 0; i < m; ++i)
    if (i != j) idx.push_back(i);
  std::vector<double> d(m);
  for (std::size_t i = 0; i < m; ++i) d[i] = squared_distance(centers, i, c);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  idx.resize(u);
  return idx;
}

/// Assignment of neighbors to T concentric shells of the ball of radius r2.
/// Shell 0 is innermost: neighbor s lands in shell t (0-based) iff
/// t·r2/T < ‖p_s − c‖ ≤ (t+1)·r2/T, with shell 0 also holding distance 0.
struct ShellPartition {
  std::vector<std::size_t> shell_of;              // per neighbor position
  std::vector<std::size_t> counts;                // per shell
  std::vector<std::vector<std::size_t>> members;  // neighbor positions per shell

  std::size_t shells() const { return counts.size(); }
};

inline ShellPartition shell_partition(const PointSet& points, const std::vector<std::size_t>& neighbors,
                                      const Vec3& center, double r2, std::size_t t_shells) {
  if (t_shells == 0) throw ArgumentError("shell_partition: need at least one shell");
  if (!(r2 > 0.0)) throw ArgumentError("shell_partition: radius must be positive");
  std::vector<double> bounds(t_shells);
  for (std::size_t t = 0; t < t_shells; ++t) {
    bounds[t] = r2 * static_cast<double>(t + 1) / static_cast<double>(t_shells);
  }
  bounds.back() = r2;
  ShellPartition sp;
  sp.shell_of.resize(neighbors.size());
  sp.counts.assign(t_shells, 0);
  sp.members.assign(t_shells, {});
  for (std::size_t s = 0; s < neighbors.size(); ++s) {
    const double d = std::sqrt(squared_distance(points, neighbors[s], center));
    if (d > r2) {
      throw ContractError("shell_partition: neighbor " + std::to_string(neighbors[s]) + " lies outside radius " +
                          std::to_string(r2));
    }
    std::size_t t = 0;
    while (d > bounds[t]) ++t;
    sp.shell_of[s] = t;
    ++sp.counts[t];
    sp.members[t].push_back(s);
  }
  return sp;
}

}  // namespace lrl
