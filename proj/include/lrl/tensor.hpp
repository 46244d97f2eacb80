#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lrl/errors.hpp"

namespace lrl {

/// Dense row-major array of doubles. Rank-1 tensors behave as 1×n rows in the
/// matrix operations.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(element_count(shape), fill) {}

  Tensor(std::vector<std::size_t> dims, std::vector<double> values)
      : shape(std::move(dims)), data(std::move(values)) {
    if (element_count(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
    }
  }

  static Tensor matrix(std::size_t r, std::size_t c, double fill = 0.0) {
    return Tensor({r, c}, fill);
  }
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t = matrix(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged rows in from_rows");
      for (double v : row) t.data[i++] = v;
    }
    return t;
  }

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
    os << ']';
    return os.str();
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
  std::size_t cols() const {
    if (rank() == 2) return shape[1];
    return rank() == 1 ? shape[0] : size();
  }
  bool is_matrix_like() const { return rank() == 1 || rank() == 2; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const { return shape_string(shape); }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor& o) const = default;
};

/// Lexicographic comparison of rows i and j of a matrix: -1, 0 or 1.
inline int compare_rows(const Tensor& a, std::size_t i, std::size_t j) {
  const std::size_t c = a.cols();
  for (std::size_t x = 0; x < c; ++x) {
    const double u = a.data[i * c + x], v = a.data[j * c + x];
    if (u != v) return u < v ? -1 : 1;
  }
  return 0;
}

}  // namespace lrl
