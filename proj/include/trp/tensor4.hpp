#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace trp {

/// Dense 4-D array of 64-bit floats, row-major over (d0, d1, d2, d3).
/// Convolution filters use (filters, in_channels, kh, kw); activations use
/// (batch, channels, height, width).
struct Tensor4 {
  std::array<std::size_t, 4> dims{0, 0, 0, 0};
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(std::size_t d0, std::size_t d1, std::size_t d2, std::size_t d3,
          double fill = 0.0)
      : dims{d0, d1, d2, d3}, data(d0 * d1 * d2 * d3, fill) {}

  std::size_t size() const { return data.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k,
                    std::size_t l) const {
    return ((i * dims[1] + j) * dims[2] + k) * dims[3] + l;
  }

  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data[index(i, j, k, l)];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data[index(i, j, k, l)];
  }

  /// Pointer to the (d2 x d3) plane at (i, j).
  double* plane(std::size_t i, std::size_t j) {
    return data.data() + (i * dims[1] + j) * dims[2] * dims[3];
  }
  const double* plane(std::size_t i, std::size_t j) const {
    return data.data() + (i * dims[1] + j) * dims[2] * dims[3];
  }

  bool same_shape(const Tensor4& o) const { return dims == o.dims; }
};

double frobenius_norm(const Tensor4& t);
double max_abs_diff(const Tensor4& a, const Tensor4& b);

void validate_finite(const Tensor4& t, const char* what);

}  // namespace trp
