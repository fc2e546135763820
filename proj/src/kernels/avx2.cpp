#include "kernels_internal.hpp"

#if defined(TRP_HAVE_AVX2)

#include <immintrin.h>

// AVX2 variants. Multiply and add stay separate instructions (no FMA) and
// each lane follows the scalar accumulator law, so outputs match the scalar
// kernels bit for bit.

namespace trp::kernels::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d accv = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d av = _mm256_loadu_pd(a + i);
    const __m256d bv = _mm256_loadu_pd(b + i);
    accv = _mm256_add_pd(accv, _mm256_mul_pd(av, bv));
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, accv);
  for (std::size_t i = n4; i < n; ++i) acc[i % 4] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void madd(double* out, const double* x, double alpha, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d av = _mm256_set1_pd(alpha);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d o = _mm256_loadu_pd(out + i);
    const __m256d xv = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(out + i, _mm256_add_pd(o, _mm256_mul_pd(av, xv)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] += alpha * x[i];
}

void rotate_pair(double* x, double* y, double c, double s, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d cv = _mm256_set1_pd(c);
  const __m256d sv = _mm256_set1_pd(s);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(
        x + i, _mm256_add_pd(_mm256_mul_pd(cv, xv), _mm256_mul_pd(sv, yv)));
    _mm256_storeu_pd(
        y + i, _mm256_sub_pd(_mm256_mul_pd(cv, yv), _mm256_mul_pd(sv, xv)));
  }
  for (std::size_t i = n4; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi + s * yi;
    y[i] = c * yi - s * xi;
  }
}

void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d muv = _mm256_set1_pd(momentum);
  const __m256d wdv = _mm256_set1_pd(weight_decay);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d vv = _mm256_loadu_pd(v + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d step = _mm256_add_pd(gv, _mm256_mul_pd(wdv, wv));
    const __m256d vnew = _mm256_add_pd(_mm256_mul_pd(muv, vv), step);
    _mm256_storeu_pd(v + i, vnew);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(wv, _mm256_mul_pd(lrv, vnew)));
  }
  for (std::size_t i = n4; i < n; ++i) {
    const double step = g[i] + weight_decay * w[i];
    v[i] = momentum * v[i] + step;
    w[i] = w[i] - lr * v[i];
  }
}

}  // namespace trp::kernels::avx2

#endif  // TRP_HAVE_AVX2
