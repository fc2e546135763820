#pragma once

#include <cstddef>
#include <vector>

namespace trp {

/// Dense row-major matrix of 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  static Matrix identity(std::size_t n);
  Matrix transposed() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Throws ValidationError if any entry is NaN or infinite.
void validate_finite(const Matrix& m, const char* what);

}  // namespace trp
