#pragma once

#include <cstddef>
#include <vector>

namespace ps {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> d;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), d(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return d[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return d[r * cols + c]; }
  double* row(std::size_t r) { return d.data() + r * cols; }
  const double* row(std::size_t r) const { return d.data() + r * cols; }

  void fill(double v) { std::fill(d.begin(), d.end(), v); }

  static Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }
};

}  // namespace ps
