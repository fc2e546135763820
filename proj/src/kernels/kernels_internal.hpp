#pragma once

#include <cstddef>

namespace trp::kernels {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*madd)(double*, const double*, double, std::size_t);
  void (*rotate_pair)(double*, double*, double, double, std::size_t);
  void (*sgd_update)(double*, double*, const double*, std::size_t, double,
                     double, double);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void madd(double* out, const double* x, double alpha, std::size_t n);
void rotate_pair(double* x, double* y, double c, double s, std::size_t n);
void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay);
}  // namespace scalar

#if defined(TRP_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void madd(double* out, const double* x, double alpha, std::size_t n);
void rotate_pair(double* x, double* y, double c, double s, std::size_t n);
void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay);
}  // namespace avx2
#endif

}  // namespace trp::kernels
