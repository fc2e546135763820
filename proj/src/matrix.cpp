#include "trp/matrix.hpp"

#include <cmath>
#include <string>

#include "trp/common.hpp"
#include "trp/kernels.hpp"
#include "trp/tensor4.hpp"

namespace trp {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ValidationError("matmul: inner dimension mismatch");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      kernels::madd(out.row(i), b.row(k), a(i, k), b.cols);
  return out;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s = std::max(s, std::fabs(v));
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ValidationError("max_abs_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s = std::max(s, std::fabs(a.data[i] - b.data[i]));
  return s;
}

void validate_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.data.size(); ++i)
    if (!std::isfinite(m.data[i]))
      throw ValidationError(std::string(what) + ": non-finite entry at index " +
                            std::to_string(i));
}

double frobenius_norm(const Tensor4& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  if (!a.same_shape(b)) throw ValidationError("max_abs_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s = std::max(s, std::fabs(a.data[i] - b.data[i]));
  return s;
}

void validate_finite(const Tensor4& t, const char* what) {
  for (std::size_t i = 0; i < t.data.size(); ++i)
    if (!std::isfinite(t.data[i]))
      throw ValidationError(std::string(what) + ": non-finite entry at index " +
                            std::to_string(i));
}

}  // namespace trp
