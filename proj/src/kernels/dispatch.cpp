#include "trp/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "trp/common.hpp"

namespace trp::kernels {

namespace {

constexpr Ops kScalarOps{scalar::dot, scalar::madd, scalar::rotate_pair,
                         scalar::sgd_update};

#if defined(TRP_HAVE_AVX2)
constexpr Ops kAvx2Ops{avx2::dot, avx2::madd, avx2::rotate_pair,
                       avx2::sgd_update};
#endif

bool cpu_has_avx2() {
#if defined(TRP_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

struct State {
  Backend backend;
  const Ops* ops;
};

State initial_state() {
  Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("TRP_KERNEL_BACKEND")) {
    const std::string v(env);
    if (v == "scalar") {
      b = Backend::scalar;
    } else if (v == "avx2" && cpu_has_avx2()) {
      b = Backend::avx2;
    }
  }
#if defined(TRP_HAVE_AVX2)
  return {b, b == Backend::avx2 ? &kAvx2Ops : &kScalarOps};
#else
  return {b, &kScalarOps};
#endif
}

State& state() {
  static State s = initial_state();
  return s;
}

}  // namespace

Backend active() { return state().backend; }

bool available(Backend b) {
  return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

void force(Backend b) {
  if (!available(b))
    throw ValidationError(std::string("kernel backend not available: ") +
                          name(b));
#if defined(TRP_HAVE_AVX2)
  state() = {b, b == Backend::avx2 ? &kAvx2Ops : &kScalarOps};
#else
  state() = {b, &kScalarOps};
#endif
}

const char* name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
  return state().ops->dot(a, b, n);
}

double dot_rows(const double* a, std::size_t a_stride, const double* b,
                std::size_t b_stride, std::size_t rows, std::size_t n) {
  const auto f = state().ops->dot;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    total += f(a + r * a_stride, b + r * b_stride, n);
  return total;
}

void madd(double* out, const double* x, double alpha, std::size_t n) {
  state().ops->madd(out, x, alpha, n);
}

void madd_rows(double* out, std::size_t out_stride, const double* x,
               std::size_t x_stride, double alpha, std::size_t rows,
               std::size_t n) {
  const auto f = state().ops->madd;
  for (std::size_t r = 0; r < rows; ++r)
    f(out + r * out_stride, x + r * x_stride, alpha, n);
}

void rotate_pair(double* x, double* y, double c, double s, std::size_t n) {
  state().ops->rotate_pair(x, y, c, s, n);
}

void sgd_update(double* w, double* v, const double* g, std::size_t n,
                double lr, double momentum, double weight_decay) {
  state().ops->sgd_update(w, v, g, n, lr, momentum, weight_decay);
}

}  // namespace trp::kernels
