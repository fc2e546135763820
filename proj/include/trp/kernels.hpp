#pragma once

#include <cstddef>

namespace trp::kernels {

/// The arithmetic inner loops below exist in a scalar reference version and
/// an AVX2 version, selected at runtime. Both implement the *same* fixed
/// evaluation order, so results are bit-identical regardless of backend:
///
///   - elementwise ops (madd, rotate_pair, sgd_update) round each element
///     independently, with multiply then add (never fused);
///   - reductions (dot) use four interleaved accumulators,
///     acc[j] = sum of terms with index i % 4 == j taken in increasing i,
///     combined as (acc[0] + acc[1]) + (acc[2] + acc[3]);
///   - row variants process rows in increasing order, one sub-result per
///     row, folded into the total left to right.
///
/// The whole training stack is built on these, which is what makes the
/// trainer reproducible byte-for-byte while still using SIMD.
enum class Backend { scalar, avx2 };

Backend active();
bool available(Backend b);
/// Select a backend explicitly (tests, benchmarking). Throws ValidationError
/// if the CPU lacks it. The TRP_KERNEL_BACKEND environment variable
/// ("scalar" or "avx2") sets the initial selection.
void force(Backend b);
const char* name(Backend b);

/// (acc[0]+acc[1]) + (acc[2]+acc[3]) with acc[j] = sum_{i % 4 == j} a[i]*b[i].
double dot(const double* a, const double* b, std::size_t n);

/// Sum of dot(a + r*a_stride, b + r*b_stride, n) over rows r, folded in row
/// order.
double dot_rows(const double* a, std::size_t a_stride, const double* b,
                std::size_t b_stride, std::size_t rows, std::size_t n);

/// out[i] += alpha * x[i]
void madd(double* out, const double* x, double alpha, std::size_t n);

/// madd applied to each of `rows` rows with the given strides.
void madd_rows(double* out, std::size_t out_stride, const double* x,
               std::size_t x_stride, double alpha, std::size_t rows,
               std::size_t n);

/// Givens rotation of two vectors: x' = c*x + s*y, y' = c*y - s*x.
void rotate_pair(double* x, double* y, double c, double s, std::size_t n);

/// Heavy-ball SGD update, one fused pass:
///   v[i] = momentum*v[i] + (g[i] + weight_decay*w[i]);  w[i] -= lr*v[i]
void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay);

}  // namespace trp::kernels
