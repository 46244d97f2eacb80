#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lrl/errors.hpp"
#include "lrl/geometry.hpp"
#include "lrl/rng.hpp"
#include "lrl/tensor.hpp"

namespace lrl {

struct Dataset {
  std::vector<PointSet> clouds;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return clouds.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  /// Clouds and labels; class names are not part of the file format.
  bool same_content(const Dataset& o) const {
    return clouds == o.clouds && labels == o.labels && num_classes() == o.num_classes();
  }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Centers at the centroid and scales so the farthest point has norm 1.
inline void normalize_cloud(PointSet& pts) {
  const std::size_t n = pts.rows();
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) c[a] += pts(i, a);
  for (auto& v : c) v /= static_cast<double>(n);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      pts(i, a) -= c[a];
      s += pts(i, a) * pts(i, a);
    }
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  if (max_norm > 0.0) {
    for (auto& v : pts.data) v /= max_norm;
  }
}

inline bool is_normalized(const PointSet& pts, double tol = 1e-9) {
  const std::size_t n = pts.rows();
  if (n == 0) return false;
  std::array<double, 3> c{0.0, 0.0, 0.0};
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      c[a] += pts(i, a);
      s += pts(i, a) * pts(i, a);
    }
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  for (auto v : c) {
    if (std::abs(v / static_cast<double>(n)) > tol) return false;
  }
  return std::abs(max_norm - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Synthetic shapes
// ---------------------------------------------------------------------------

enum class PrimitiveKind { box, cylinder, cone, sphere };

/// Axis-aligned primitive; `size` holds half extents (box), radius/half height
/// (cylinder, cone) or radius (sphere).
struct Primitive {
  PrimitiveKind kind;
  Vec3 center;
  Vec3 size;

  double area() const {
    const double a = size[0], b = size[1], c = size[2];
    constexpr double pi = 3.14159265358979323846;
    switch (kind) {
      case PrimitiveKind::box:
        return 8.0 * (a * b + b * c + a * c);
      case PrimitiveKind::cylinder:
        return 2.0 * pi * a * (2.0 * b) + 2.0 * pi * a * a;
      case PrimitiveKind::cone:
        return pi * a * std::sqrt(a * a + 4.0 * b * b) + pi * a * a;
      case PrimitiveKind::sphere:
        return 4.0 * pi * a * a;
    }
    return 0.0;
  }

  Vec3 sample(Rng& rng) const {
    constexpr double two_pi = 6.28318530717958647692;
    const double a = size[0], b = size[1], c = size[2];
    Vec3 p{};
    switch (kind) {
      case PrimitiveKind::box: {
        const double axy = a * b, ayz = b * c, axz = a * c;
        const double pick = rng.uniform() * (axy + ayz + axz);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
        if (pick < axy) {
          p = {u * a, v * b, sign * c};
        } else if (pick < axy + ayz) {
          p = {sign * a, u * b, v * c};
        } else {
          p = {u * a, sign * b, v * c};
        }
        break;
      }
      case PrimitiveKind::cylinder: {
        const double side = 2.0 * a * b;  // proportional to side area / (2π)
        const double caps = a * a;        // proportional to both caps / (2π)
        const double t = two_pi * rng.uniform();
        if (rng.uniform() * (side + caps) < side) {
          p = {a * std::cos(t), a * std::sin(t), rng.uniform(-b, b)};
        } else {
          const double rr = a * std::sqrt(rng.uniform());
          p = {rr * std::cos(t), rr * std::sin(t), rng.uniform() < 0.5 ? -b : b};
        }
        break;
      }
      case PrimitiveKind::cone: {
        const double slant = a * std::sqrt(a * a + 4.0 * b * b);
        const double base = a * a;
        const double t = two_pi * rng.uniform();
        if (rng.uniform() * (slant + base) < slant) {
          // Radius grows linearly from apex; area density ∝ radius.
          const double f = std::sqrt(rng.uniform());
          p = {f * a * std::cos(t), f * a * std::sin(t), b - 2.0 * b * f};
        } else {
          const double rr = a * std::sqrt(rng.uniform());
          p = {rr * std::cos(t), rr * std::sin(t), -b};
        }
        break;
      }
      case PrimitiveKind::sphere: {
        const double z = rng.uniform(-1.0, 1.0);
        const double t = two_pi * rng.uniform();
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        p = {a * s * std::cos(t), a * s * std::sin(t), a * z};
        break;
      }
    }
    return {p[0] + center[0], p[1] + center[1], p[2] + center[2]};
  }

  bool on_surface(const Vec3& q, double tol) const {
    const double x = q[0] - center[0], y = q[1] - center[1], z = q[2] - center[2];
    const double a = size[0], b = size[1], c = size[2];
    switch (kind) {
      case PrimitiveKind::box: {
        const double ax = std::abs(x), ay = std::abs(y), az = std::abs(z);
        if (ax > a + tol || ay > b + tol || az > c + tol) return false;
        return std::abs(ax - a) <= tol || std::abs(ay - b) <= tol || std::abs(az - c) <= tol;
      }
      case PrimitiveKind::cylinder: {
        const double r = std::hypot(x, y);
        if (std::abs(z) > b + tol || r > a + tol) return false;
        return std::abs(r - a) <= tol || std::abs(std::abs(z) - b) <= tol;
      }
      case PrimitiveKind::cone: {
        const double r = std::hypot(x, y);
        if (z < -b - tol || z > b + tol) return false;
        const double side_r = a * (b - z) / (2.0 * b);
        return std::abs(r - side_r) <= tol || (std::abs(z + b) <= tol && r <= a + tol);
      }
      case PrimitiveKind::sphere:
        return std::abs(std::sqrt(x * x + y * y + z * z) - a) <= tol;
    }
    return false;
  }
};

inline const std::vector<std::string>& shape_family_names() {
  static const std::vector<std::string> names{"box", "cylinder", "chair", "cone", "table", "sphere"};
  return names;
}

/// Parts of one randomly proportioned instance of a shape family, z up.
inline std::vector<Primitive> make_shape(std::size_t family, Rng& rng) {
  using K = PrimitiveKind;
  auto box = [](Vec3 c, Vec3 half) { return Primitive{K::box, c, half}; };
  switch (family) {
    case 0:
      return {box({0, 0, 0}, {rng.uniform(0.3, 0.5), rng.uniform(0.3, 0.5), rng.uniform(0.25, 0.5)})};
    case 1:
      return {Primitive{K::cylinder, {0, 0, 0}, {rng.uniform(0.3, 0.5), rng.uniform(0.4, 0.7), 0}}};
    case 2: {
      const double w = rng.uniform(0.35, 0.45), d = rng.uniform(0.35, 0.45);
      const double leg_h = rng.uniform(0.2, 0.3), back_h = rng.uniform(0.25, 0.4);
      const double t = 0.04;
      std::vector<Primitive> parts{box({0, 0, leg_h + t}, {w, d, t}),
                                   box({0, -d + t, leg_h + 2 * t + back_h}, {w, t, back_h})};
      for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0}) parts.push_back(box({sx * (w - t), sy * (d - t), leg_h / 2}, {t, t, leg_h / 2}));
      return parts;
    }
    case 3:
      return {Primitive{K::cone, {0, 0, 0}, {rng.uniform(0.35, 0.55), rng.uniform(0.4, 0.65), 0}}};
    case 4: {
      const double w = rng.uniform(0.5, 0.7), d = rng.uniform(0.3, 0.45), leg_h = rng.uniform(0.3, 0.4);
      const double t = 0.035;
      std::vector<Primitive> parts{box({0, 0, 2 * leg_h + t}, {w, d, t})};
      for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0}) parts.push_back(box({sx * (w - t), sy * (d - t), leg_h}, {t, t, leg_h}));
      return parts;
    }
    case 5:
      return {Primitive{K::sphere, {0, 0, 0}, {rng.uniform(0.4, 0.6), 0, 0}}};
    default:
      throw ArgumentError("unknown shape family " + std::to_string(family));
  }
}

/// n area-weighted surface samples over all parts.
inline PointSet sample_parts(const std::vector<Primitive>& parts, std::size_t n, Rng& rng) {
  std::vector<double> cum;
  double total = 0.0;
  for (const auto& p : parts) cum.push_back(total += p.area());
  PointSet pts = Tensor::matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()), parts.size() - 1);
    const Vec3 q = parts[k].sample(rng);
    for (std::size_t a = 0; a < 3; ++a) pts(i, a) = q[a];
  }
  return pts;
}

inline bool on_any_surface(const std::vector<Primitive>& parts, const Vec3& q, double tol = 1e-12) {
  return std::any_of(parts.begin(), parts.end(), [&](const Primitive& p) { return p.on_surface(q, tol); });
}

struct SynthSpec {
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t points = 1024;
  double noise = 0.01;
  bool clutter = false;

  void validate() const {
    if (classes < 2) throw ArgumentError("synthetic: need at least 2 classes");
    if (classes > shape_family_names().size()) {
      throw ArgumentError("synthetic: at most " + std::to_string(shape_family_names().size()) + " classes available");
    }
    if (per_class == 0) throw ArgumentError("synthetic: per_class must be positive");
    if (points < 64) throw ArgumentError("synthetic: need at least 64 points per cloud");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ArgumentError("synthetic: noise must be a finite value >= 0");
  }
};

namespace detail {

inline void rotate_yaw(PointSet& pts, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const double x = pts(i, 0), y = pts(i, 1);
    pts(i, 0) = c * x - s * y;
    pts(i, 1) = s * x + c * y;
  }
}

/// Ground patch under the object plus a few box fragments beside it.
inline PointSet clutter_points(const PointSet& object, std::size_t n, Rng& rng) {
  double zmin = object(0, 2);
  double reach = 0.0;
  for (std::size_t i = 0; i < object.rows(); ++i) {
    zmin = std::min(zmin, object(i, 2));
    reach = std::max(reach, std::hypot(object(i, 0), object(i, 1)));
  }
  const std::size_t n_plane = n / 2;
  const double ext = 1.3 * reach;
  const double ox = rng.uniform(-0.2, 0.2) * reach, oy = rng.uniform(-0.2, 0.2) * reach;
  std::vector<Primitive> frags;
  const std::size_t n_frag = 1 + rng.index(2);
  constexpr double two_pi = 6.28318530717958647692;
  for (std::size_t f = 0; f < n_frag; ++f) {
    const double ang = two_pi * rng.uniform();
    const double dist = reach * rng.uniform(1.0, 1.4);
    const Vec3 half{rng.uniform(0.08, 0.2), rng.uniform(0.08, 0.2), rng.uniform(0.1, 0.3)};
    frags.push_back({PrimitiveKind::box, {dist * std::cos(ang), dist * std::sin(ang), zmin + half[2]}, half});
  }
  PointSet pts = Tensor::matrix(n, 3);
  for (std::size_t i = 0; i < n_plane; ++i) {
    pts(i, 0) = ox + rng.uniform(-ext, ext);
    pts(i, 1) = oy + rng.uniform(-ext, ext);
    pts(i, 2) = zmin;
  }
  PointSet fp = sample_parts(frags, n - n_plane, rng);
  std::copy(fp.data.begin(), fp.data.end(), pts.data.begin() + n_plane * 3);
  return pts;
}

}  // namespace detail

/// Labels cycle through the first `classes` shape families; clouds come out normalized.
inline Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset ds;
  ds.class_names.assign(shape_family_names().begin(), shape_family_names().begin() + spec.classes);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      Rng rng(derive_seed({seed, 0x5e7, i, c}));
      const auto parts = make_shape(c, rng);
      const std::size_t n_obj = spec.clutter ? spec.points - spec.points * 3 / 10 : spec.points;
      PointSet obj = sample_parts(parts, n_obj, rng);
      if (spec.noise > 0.0) {
        for (auto& v : obj.data) v += spec.noise * rng.normal();
      }
      detail::rotate_yaw(obj, 6.28318530717958647692 * rng.uniform());
      PointSet cloud = obj;
      if (spec.clutter) {
        PointSet extra = detail::clutter_points(obj, spec.points - n_obj, rng);
        if (spec.noise > 0.0) {
          for (auto& v : extra.data) v += spec.noise * rng.normal();
        }
        cloud = Tensor::matrix(spec.points, 3);
        std::copy(obj.data.begin(), obj.data.end(), cloud.data.begin());
        std::copy(extra.data.begin(), extra.data.end(), cloud.data.begin() + obj.size());
      }
      normalize_cloud(cloud);
      ds.clouds.push_back(std::move(cloud));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

/// Stratified per class: shuffles each class's indices and sends round(fraction·n) to test.
inline Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ArgumentError("test fraction must lie in [0, 1)");
  Split sp;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == c) idx.push_back(i);
    Rng rng(derive_seed({seed, 0x5917, c}));
    rng.shuffle(idx);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    sp.test.insert(sp.test.end(), idx.begin(), idx.begin() + n_test);
    sp.train.insert(sp.train.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(sp.train.begin(), sp.train.end());
  std::sort(sp.test.begin(), sp.test.end());
  return sp;
}

// ---------------------------------------------------------------------------
// Text file format
//   LRLDS1 <num_clouds> <num_classes>
//   cloud <label> <num_points>
//   x y z            (num_points lines)
// ---------------------------------------------------------------------------

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "LRLDS1 " << ds.size() << ' ' << ds.num_classes() << '\n';
  char buf[96];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const PointSet& p = ds.clouds[i];
    os << "cloud " << ds.labels[i] << ' ' << p.rows() << '\n';
    for (std::size_t r = 0; r < p.rows(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p(r, 0), p(r, 1), p(r, 2));
      os << buf;
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}

  bool next(std::string& line) {
    offset_ = next_offset_;
    if (!std::getline(is_, line)) return false;
    ++line_no_;
    next_offset_ += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(name_ + ":" + std::to_string(line_no_) + " (byte offset " + std::to_string(offset_) + "): " + what,
                     line_no_);
  }

  [[noreturn]] void fail_eof(const std::string& what) const {
    throw ParseError(name_ + ": unexpected end of file at byte offset " + std::to_string(next_offset_) + ": " + what,
                     line_no_ + 1);
  }

 private:
  std::istream& is_;
  std::string name_;
  std::size_t line_no_ = 0;
  std::size_t offset_ = 0;
  std::size_t next_offset_ = 0;
};

}  // namespace detail

/// Parses a dataset file. With `points` > 0 every cloud is resampled to exactly that
/// many points (subsample without replacement, or pad with replacement) and then
/// normalized. Clouds that arrive unnormalized are fixed and reported in `warnings`.
inline Dataset load_dataset(const std::string& path, std::size_t points, std::uint64_t seed,
                            std::vector<std::string>* warnings = nullptr) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset " + path);
  detail::LineReader rd(is, path);
  std::string line;
  if (!rd.next(line)) rd.fail_eof("missing header");
  std::istringstream hs(line);
  std::string magic;
  std::size_t n_clouds = 0, n_classes = 0;
  std::string extra;
  if (!(hs >> magic >> n_clouds >> n_classes) || magic != "LRLDS1" || (hs >> extra)) {
    rd.fail("expected header 'LRLDS1 <num_clouds> <num_classes>'");
  }
  if (n_classes < 2) rd.fail("need at least 2 classes");
  Dataset ds;
  for (std::size_t c = 0; c < n_classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
  for (std::size_t i = 0; i < n_clouds; ++i) {
    if (!rd.next(line)) rd.fail_eof("expected cloud " + std::to_string(i));
    std::istringstream cs(line);
    std::string tag;
    std::size_t label = 0, n_pts = 0;
    if (!(cs >> tag >> label >> n_pts) || tag != "cloud" || (cs >> extra)) {
      rd.fail("expected 'cloud <label> <num_points>'");
    }
    if (label >= n_classes) rd.fail("label " + std::to_string(label) + " out of range");
    if (n_pts == 0) rd.fail("cloud has no points");
    PointSet p = Tensor::matrix(n_pts, 3);
    for (std::size_t r = 0; r < n_pts; ++r) {
      if (!rd.next(line)) rd.fail_eof("cloud " + std::to_string(i) + " has fewer points than declared");
      std::istringstream ps(line);
      double x, y, z;
      if (!(ps >> x >> y >> z) || (ps >> extra)) rd.fail("expected 'x y z'");
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) rd.fail("non-finite coordinate");
      p(r, 0) = x;
      p(r, 1) = y;
      p(r, 2) = z;
    }
    if (points > 0 && n_pts != points) {
      Rng rng(derive_seed({seed, 0x10ad, i}));
      std::vector<std::size_t> pick;
      if (n_pts > points) {
        std::vector<std::size_t> all(n_pts);
        for (std::size_t k = 0; k < n_pts; ++k) all[k] = k;
        for (std::size_t k = 0; k < points; ++k) std::swap(all[k], all[k + rng.index(n_pts - k)]);
        pick.assign(all.begin(), all.begin() + points);
        std::sort(pick.begin(), pick.end());
      } else {
        for (std::size_t k = 0; k < n_pts; ++k) pick.push_back(k);
        while (pick.size() < points) pick.push_back(rng.index(n_pts));
      }
      PointSet q = Tensor::matrix(points, 3);
      for (std::size_t k = 0; k < points; ++k)
        for (std::size_t a = 0; a < 3; ++a) q(k, a) = p(pick[k], a);
      p = std::move(q);
      normalize_cloud(p);
    } else if (!is_normalized(p)) {
      if (warnings) warnings->push_back("cloud " + std::to_string(i) + " was not normalized; re-normalized");
      normalize_cloud(p);
    }
    ds.clouds.push_back(std::move(p));
    ds.labels.push_back(label);
  }
  if (rd.next(line) && line.find_first_not_of(" \t") != std::string::npos) rd.fail("trailing content after last cloud");
  return ds;
}

}  // namespace lrl
