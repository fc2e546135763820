#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "trp/common.hpp"
#include "trp/kernels.hpp"
#include "trp/rng.hpp"

namespace k = trp::kernels;

namespace {

std::vector<double> random_vec(trp::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

struct BackendGuard {
  k::Backend saved = k::active();
  ~BackendGuard() { k::force(saved); }
};

/// The documented reduction law, written out longhand.
double dot_law(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) acc[i % 4] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

TEST_CASE("kernel backends report sensibly") {
  CHECK(k::available(k::Backend::scalar));
  CHECK(k::name(k::Backend::scalar) == std::string("scalar"));
  CHECK(k::name(k::Backend::avx2) == std::string("avx2"));
  CHECK(k::available(k::active()));
}

TEST_CASE("scalar dot follows the four-accumulator law") {
  BackendGuard guard;
  k::force(k::Backend::scalar);
  trp::Rng rng(7);
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 16, 33, 64, 101}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(k::dot(a.data(), b.data(), n) == dot_law(a.data(), b.data(), n));
  }
}

TEST_CASE("avx2 kernels are bit-identical to scalar") {
  if (!k::available(k::Backend::avx2)) return;
  BackendGuard guard;
  trp::Rng rng(11);

  for (std::size_t n :
       {1, 2, 3, 4, 5, 6, 7, 8, 9, 15, 16, 17, 31, 32, 33, 63, 64, 100, 257}) {
    const auto a = random_vec(rng, n, 3.0);
    const auto b = random_vec(rng, n, 0.5);
    const auto g = random_vec(rng, n, 0.1);
    const double alpha = rng.normal();
    const double c = std::cos(0.7), s = std::sin(0.7);

    k::force(k::Backend::scalar);
    const double dot_s = k::dot(a.data(), b.data(), n);
    auto madd_s = a;
    k::madd(madd_s.data(), b.data(), alpha, n);
    auto rx_s = a, ry_s = b;
    k::rotate_pair(rx_s.data(), ry_s.data(), c, s, n);
    auto w_s = a, v_s = b;
    k::sgd_update(w_s.data(), v_s.data(), g.data(), n, 0.1, 0.9, 1e-4);

    k::force(k::Backend::avx2);
    const double dot_v = k::dot(a.data(), b.data(), n);
    auto madd_v = a;
    k::madd(madd_v.data(), b.data(), alpha, n);
    auto rx_v = a, ry_v = b;
    k::rotate_pair(rx_v.data(), ry_v.data(), c, s, n);
    auto w_v = a, v_v = b;
    k::sgd_update(w_v.data(), v_v.data(), g.data(), n, 0.1, 0.9, 1e-4);

    CHECK(dot_s == dot_v);
    CHECK(madd_s == madd_v);
    CHECK(rx_s == rx_v);
    CHECK(ry_s == ry_v);
    CHECK(w_s == w_v);
    CHECK(v_s == v_v);
  }
}

TEST_CASE("row variants fold rows in order on both backends") {
  BackendGuard guard;
  trp::Rng rng(13);
  const std::size_t rows = 9, n = 21, a_stride = 25, b_stride = 30;
  const auto a = random_vec(rng, rows * a_stride);
  const auto b = random_vec(rng, rows * b_stride);

  std::vector<k::Backend> backends = {k::Backend::scalar};
  if (k::available(k::Backend::avx2)) backends.push_back(k::Backend::avx2);

  std::vector<double> dots, madds;
  for (k::Backend be : backends) {
    k::force(be);
    dots.push_back(
        k::dot_rows(a.data(), a_stride, b.data(), b_stride, rows, n));
    auto out = a;
    k::madd_rows(out.data(), a_stride, b.data(), b_stride, 0.37, rows, n);
    madds.push_back(out[3 * a_stride + 5]);

    // Same law, written directly.
    double want = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      want += dot_law(a.data() + r * a_stride, b.data() + r * b_stride, n);
    }
    CHECK(dots.back() == want);
  }
  for (std::size_t i = 1; i < dots.size(); ++i) {
    CHECK(dots[i] == dots[0]);
    CHECK(madds[i] == madds[0]);
  }
}

TEST_CASE("sgd_update matches the plain recurrence") {
  BackendGuard guard;
  trp::Rng rng(17);
  const std::size_t n = 37;
  auto w = random_vec(rng, n);
  auto v = random_vec(rng, n);
  const auto g = random_vec(rng, n);
  auto w_ref = w, v_ref = v;
  for (std::size_t i = 0; i < n; ++i) {
    const double step = g[i] + 1e-4 * w_ref[i];
    v_ref[i] = 0.9 * v_ref[i] + step;
    w_ref[i] = w_ref[i] - 0.1 * v_ref[i];
  }
  k::sgd_update(w.data(), v.data(), g.data(), n, 0.1, 0.9, 1e-4);
  CHECK(w == w_ref);
  CHECK(v == v_ref);
}

TEST_CASE("forcing an unavailable backend is an error") {
  // scalar is always available; only check the negative path when the CPU
  // truly lacks avx2.
  if (!k::available(k::Backend::avx2)) {
    CHECK_THROWS_AS(k::force(k::Backend::avx2), trp::ValidationError);
  }
}
