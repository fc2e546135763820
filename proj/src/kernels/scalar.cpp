#include "kernels_internal.hpp"

// Reference kernels. The evaluation order here *defines* the semantics; the
// AVX2 versions reproduce it lane for lane.

namespace trp::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[i % 4] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void madd(double* out, const double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += alpha * x[i];
}

void rotate_pair(double* x, double* y, double c, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi + s * yi;
    y[i] = c * yi - s * xi;
  }
}

void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    const double step = g[i] + weight_decay * w[i];
    v[i] = momentum * v[i] + step;
    w[i] = w[i] - lr * v[i];
  }
}

}  // namespace trp::kernels::scalar
