#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "trp/common.hpp"
#include "trp/linalg.hpp"
#include "trp/rng.hpp"

using trp::EnergyRatio;
using trp::Matrix;

namespace {

Matrix random_matrix(trp::Rng& rng, std::size_t rows, std::size_t cols,
                     double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

double ortho_residual(const Matrix& q) {
  // max |QᵀQ - I| over the column Gram matrix.
  double worst = 0.0;
  for (std::size_t i = 0; i < q.cols; ++i) {
    for (std::size_t j = 0; j < q.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < q.rows; ++k) acc += q(k, i) * q(k, j);
      worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void check_svd_invariants(const Matrix& a) {
  const trp::SvdResult f = trp::svd(a);
  const std::size_t mn = std::min(a.rows, a.cols);
  REQUIRE(f.u.rows == a.rows);
  REQUIRE(f.u.cols == mn);
  REQUIRE(f.sigma.size() == mn);
  REQUIRE(f.vt.rows == mn);
  REQUIRE(f.vt.cols == a.cols);

  CHECK(ortho_residual(f.u) <= 1e-10);
  CHECK(ortho_residual(f.vt.transposed()) <= 1e-10);
  for (std::size_t i = 0; i + 1 < mn; ++i) CHECK(f.sigma[i] >= f.sigma[i + 1]);
  for (double s : f.sigma) CHECK(s >= 0.0);

  const Matrix back = trp::reconstruct(f);
  CHECK(trp::max_abs_diff(back, a) <= 1e-10 * (1.0 + trp::max_abs(a)));

  // Independent singular values through the Gram matrix eigenproblem.
  const std::vector<double> ref = trp::oracles::singular_values_via_gram(a);
  const double top = ref.empty() ? 0.0 : ref[0];
  for (std::size_t i = 0; i < mn; ++i) {
    CHECK(std::abs(f.sigma[i] - ref[i]) <= 1e-8 * (1.0 + top));
  }
}

}  // namespace

TEST_CASE("svd invariants hold on random shapes") {
  trp::Rng rng(101);
  for (int it = 0; it < 40; ++it) {
    const std::size_t rows = 1 + rng.below(20);
    const std::size_t cols = 1 + rng.below(20);
    check_svd_invariants(random_matrix(rng, rows, cols, 2.0));
  }
}

TEST_CASE("svd handles degenerate inputs") {
  trp::Rng rng(103);

  SUBCASE("zero matrix") {
    Matrix z(5, 3);
    const trp::SvdResult f = trp::svd(z);
    for (double s : f.sigma) CHECK(s == 0.0);
    CHECK(ortho_residual(f.u) <= 1e-12);
    CHECK(ortho_residual(f.vt.transposed()) <= 1e-12);
  }

  SUBCASE("repeated columns (rank deficient)") {
    Matrix m = random_matrix(rng, 8, 4);
    for (std::size_t r = 0; r < m.rows; ++r) {
      m(r, 3) = m(r, 0);
      m(r, 2) = m(r, 1);
    }
    check_svd_invariants(m);
    const trp::SvdResult f = trp::svd(m);
    CHECK(f.sigma[2] <= 1e-10 * (1.0 + f.sigma[0]));
    CHECK(f.sigma[3] <= 1e-10 * (1.0 + f.sigma[0]));
  }

  SUBCASE("wide matrix goes through the transpose path") {
    check_svd_invariants(random_matrix(rng, 3, 17));
  }

  SUBCASE("single row and single column") {
    check_svd_invariants(random_matrix(rng, 1, 9));
    check_svd_invariants(random_matrix(rng, 9, 1));
  }

  SUBCASE("identity") {
    check_svd_invariants(Matrix::identity(6));
  }
}

TEST_CASE("svd sign convention pins each u column") {
  trp::Rng rng(107);
  for (int it = 0; it < 10; ++it) {
    const Matrix m = random_matrix(rng, 6, 5);
    const trp::SvdResult f = trp::svd(m);
    for (std::size_t j = 0; j < f.u.cols; ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < f.u.rows; ++i) {
        if (std::abs(f.u(i, j)) > std::abs(best)) best = f.u(i, j);
      }
      CHECK(best >= 0.0);
    }
  }
}

TEST_CASE("svd rejects non-finite input") {
  Matrix m(2, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(trp::svd(m), trp::ValidationError);
}

TEST_CASE("energy ratio domain is the open interval") {
  CHECK_THROWS_AS(EnergyRatio(0.0), trp::ValidationError);
  CHECK_THROWS_AS(EnergyRatio(1.0), trp::ValidationError);
  CHECK_THROWS_AS(EnergyRatio(-0.2), trp::ValidationError);
  CHECK_THROWS_AS(EnergyRatio(1.5), trp::ValidationError);
  CHECK(EnergyRatio(0.05).value == 0.05);
}

TEST_CASE("truncation_rank worked examples") {
  // sigma [3,2,1], e = 0.3: tail(2) = 1 <= 4.2, tail(1) = 5 > 4.2 -> k = 2.
  const std::vector<double> s1 = {3.0, 2.0, 1.0};
  CHECK(trp::truncation_rank(s1, EnergyRatio(0.3)) == 2);
  // Exactly-zero tail is allowed at e -> any e keeps k = 1.
  const std::vector<double> s2 = {1.0, 0.0, 0.0};
  CHECK(trp::truncation_rank(s2, EnergyRatio(0.1)) == 1);
  const std::vector<double> s3 = {5.0};
  CHECK(trp::truncation_rank(s3, EnergyRatio(0.5)) == 1);
  // Identity 3x3: each tail term is 1/3 of the energy.
  const std::vector<double> s4 = {1.0, 1.0, 1.0};
  CHECK(trp::truncation_rank(s4, EnergyRatio(0.5)) == 2);
  // All-zero spectrum truncates to nothing.
  const std::vector<double> s5 = {0.0, 0.0};
  CHECK(trp::truncation_rank(s5, EnergyRatio(0.5)) == 0);
}

TEST_CASE("truncation_rank is minimal (exhaustive oracle)") {
  trp::Rng rng(109);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> sigma(n);
    for (double& v : sigma) v = std::abs(rng.normal());
    if (it % 7 == 0) {
      for (std::size_t i = n / 2; i < n; ++i) sigma[i] = 0.0;
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    const double e = 0.01 + 0.97 * rng.uniform();
    const std::size_t k = trp::truncation_rank(sigma, EnergyRatio(e));
    CHECK(k == trp::oracles::truncation_rank_enumerated(sigma, e));

    double total = 0.0;
    for (double s : sigma) total += s * s;
    double tail = 0.0;
    for (std::size_t j = k; j < n; ++j) tail += sigma[j] * sigma[j];
    CHECK(tail <= e * total + 1e-15);
    if (k > 0) {
      double bigger_tail = tail + sigma[k - 1] * sigma[k - 1];
      CHECK(bigger_tail > e * total);
    }
  }
}

TEST_CASE("tsvd truncates to the energy rank and satisfies Eckart-Young") {
  trp::Rng rng(113);
  for (int it = 0; it < 25; ++it) {
    const std::size_t rows = 2 + rng.below(14);
    const std::size_t cols = 2 + rng.below(14);
    const Matrix a = random_matrix(rng, rows, cols);
    const double e = 0.02 + 0.5 * rng.uniform();
    const auto [f, k] = trp::tsvd(a, EnergyRatio(e));
    const trp::SvdResult full = trp::svd(a);
    CHECK(k == trp::truncation_rank(full.sigma, EnergyRatio(e)));
    REQUIRE(f.u.cols == k);
    REQUIRE(f.sigma.size() == k);
    REQUIRE(f.vt.rows == k);

    // ||A - A_k||_F^2 equals the discarded tail energy.
    const Matrix ak = trp::reconstruct(f);
    double err2 = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double d = a.data[i] - ak.data[i];
      err2 += d * d;
    }
    double tail = 0.0;
    for (std::size_t j = k; j < full.sigma.size(); ++j) {
      tail += full.sigma[j] * full.sigma[j];
    }
    CHECK(std::abs(err2 - tail) <= 1e-9 * (1.0 + tail));
  }
}

TEST_CASE("nuclear norm equals the singular value sum") {
  trp::Rng rng(127);
  for (int it = 0; it < 10; ++it) {
    const Matrix a = random_matrix(rng, 3 + rng.below(8), 3 + rng.below(8));
    const auto ref = trp::oracles::singular_values_via_gram(a);
    double want = 0.0;
    for (double s : ref) want += s;
    CHECK(std::abs(trp::nuclear_norm(a) - want) <= 1e-8 * (1.0 + want));
  }
  CHECK(trp::nuclear_norm(Matrix(4, 6)) == 0.0);
}

TEST_CASE("nuclear subgradient matches finite differences") {
  trp::Rng rng(131);
  int checked = 0;
  while (checked < 8) {
    const std::size_t rows = 2 + rng.below(5);
    const std::size_t cols = 2 + rng.below(5);
    Matrix a = random_matrix(rng, rows, cols);
    const auto sv = trp::oracles::singular_values_via_gram(a);
    // Full rank with separated singular values keeps the norm differentiable.
    bool ok = sv.back() > 1e-3;
    for (std::size_t i = 0; i + 1 < sv.size(); ++i) {
      ok = ok && (sv[i] - sv[i + 1] > 1e-3);
    }
    if (!ok) continue;
    ++checked;

    const Matrix g = trp::nuclear_subgradient(a);
    const auto fd = trp::oracles::fd_gradient(
        a.data, [&]() { return trp::nuclear_norm(a); }, 1e-6);
    CHECK(trp::oracles::max_rel_err(g.data, fd) <= 1e-5);
  }

  SUBCASE("zero matrix maps to zero") {
    const Matrix g = trp::nuclear_subgradient(Matrix(3, 5));
    CHECK(trp::max_abs(g) == 0.0);
  }

  SUBCASE("orthogonal matrix maps to itself") {
    // For Q with all singular values 1, U V^T = Q.
    Matrix q = Matrix::identity(4);
    const Matrix g = trp::nuclear_subgradient(q);
    CHECK(trp::max_abs_diff(g, q) <= 1e-12);
  }
}
