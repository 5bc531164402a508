#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "risa/error.hpp"

namespace risa {

using Vector = std::vector<double>;

// Dense row-major matrix; rows are samples throughout the codebase.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  Vector row(std::size_t r) const {
    return Vector(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                  data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }

  void set_row(std::size_t r, const Vector& v) {
    if (v.size() != cols) throw ContractViolation("Matrix::set_row: width mismatch");
    std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
};

inline std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace risa
