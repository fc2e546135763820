#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "trp/linalg.hpp"
#include "trp/matrix.hpp"
#include "trp/tensor4.hpp"

namespace trp {

/// Filter decomposition scheme. Channel matricizes filters to
/// n x (c*kh*kw) and factorizes into a kh x kw convolution followed by a
/// 1x1 convolution; Spatial matricizes to (c*kh) x (kw*n) and factorizes
/// into a vertical (kh x 1) convolution followed by a horizontal (1 x kw)
/// one.
enum class Scheme { channel, spatial };

Scheme scheme_from_string(const std::string& s);
const char* to_string(Scheme s);

Matrix matricize(const Tensor4& w, Scheme scheme);
Tensor4 dematricize(const Matrix& m, const std::array<std::size_t, 4>& dims,
                    Scheme scheme);

struct PruneResult {
  Tensor4 tensor;
  std::size_t rank;
};

/// The low-rank approximation operator: matricize, energy-truncated SVD,
/// reconstruct, reshape back. Idempotent at fixed (scheme, e).
PruneResult rank_prune(const Tensor4& w, Scheme scheme, EnergyRatio e);

struct ConvGeom {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

/// Two convolutions replacing one: applying `first` then `second` equals
/// convolving with the rank-pruned filter. The sqrt(sigma) split gives both
/// factor tensors equal Frobenius norm.
struct FactorizedConv {
  Tensor4 first_w;
  ConvGeom first_geom;
  Tensor4 second_w;
  ConvGeom second_geom;
  std::size_t rank = 0;
  Scheme scheme = Scheme::channel;
};

/// Factorizes a filter bank. `geom` is the original convolution's geometry;
/// the stride lands on the first factor (spatial: vertical stride first,
/// horizontal second) and the padding is split per scheme. Throws
/// NumericalError if truncation leaves rank 0.
FactorizedConv factorize(const Tensor4& w, Scheme scheme, EnergyRatio e,
                         const ConvGeom& geom = {});

}  // namespace trp
