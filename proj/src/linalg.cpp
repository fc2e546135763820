#include "trp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "trp/common.hpp"
#include "trp/kernels.hpp"

namespace trp {

namespace {

constexpr double kJacobiTol = 1e-14;
constexpr int kMaxSweeps = 60;
constexpr double kRankTol = 1e-10;

// Column-major working copy so Jacobi column operations are contiguous.
struct ColMat {
  std::size_t m = 0, n = 0;
  std::vector<double> data;  // column j at data + j*m

  ColMat(std::size_t m_, std::size_t n_) : m(m_), n(n_), data(m_ * n_, 0.0) {}
  double* col(std::size_t j) { return data.data() + j * m; }
  const double* col(std::size_t j) const { return data.data() + j * m; }
};

// Rutishauser rotation for the 2x2 Gram block [[a, g], [g, b]].
void jacobi_rotation(double a, double b, double g, double& c, double& s) {
  const double zeta = (b - a) / (2.0 * g);
  double t;
  if (std::fabs(zeta) > 1e154) {
    t = 1.0 / (2.0 * zeta);
  } else {
    const double sign = zeta >= 0.0 ? 1.0 : -1.0;
    t = sign / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
  }
  c = 1.0 / std::sqrt(1.0 + t * t);
  s = c * t;
}

// One-sided Jacobi on a tall matrix (m >= n). Orthogonalizes the columns of
// `work`; `v` accumulates the rotations. Throws if the sweep cap is reached
// with pairs still above tolerance.
void jacobi_orthogonalize(ColMat& work, ColMat& v) {
  const std::size_t m = work.m;
  const std::size_t n = work.n;
  for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

  double worst = 0.0;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    worst = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double* ci = work.col(i);
        double* cj = work.col(j);
        const double a = kernels::dot(ci, ci, m);
        const double b = kernels::dot(cj, cj, m);
        const double g = kernels::dot(ci, cj, m);
        const double scale = std::sqrt(a) * std::sqrt(b);
        if (std::fabs(g) <= kJacobiTol * scale) continue;
        worst = std::max(worst, std::fabs(g) / scale);
        double c, s;
        jacobi_rotation(a, b, g, c, s);
        // (ci', cj') = (c*ci - s*cj, s*ci + c*cj)
        kernels::rotate_pair(cj, ci, c, s, m);
        kernels::rotate_pair(v.col(j), v.col(i), c, s, n);
        rotated = true;
      }
    }
    if (!rotated) return;
  }
  throw NumericalError(
      "svd: Jacobi sweeps did not converge; worst relative off-diagonal " +
      std::to_string(worst));
}

// Appends orthonormal columns for exactly-zero singular directions by
// Gram-Schmidt against the columns already placed in u (column-major, m x p,
// columns [0, filled) valid).
void complete_basis(ColMat& u, std::size_t filled, std::size_t p) {
  const std::size_t m = u.m;
  std::vector<double> cand(m);
  std::size_t next_axis = 0;
  for (std::size_t j = filled; j < p; ++j) {
    bool placed = false;
    for (; next_axis < m && !placed; ++next_axis) {
      std::fill(cand.begin(), cand.end(), 0.0);
      cand[next_axis] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < j; ++k)
          kernels::madd(cand.data(), u.col(k),
                        -kernels::dot(u.col(k), cand.data(), m), m);
      const double norm = std::sqrt(kernels::dot(cand.data(), cand.data(), m));
      if (norm > 0.5) {
        for (std::size_t r = 0; r < m; ++r) u.col(j)[r] = cand[r] / norm;
        placed = true;
      }
    }
    if (!placed)
      throw NumericalError("svd: failed to complete orthonormal basis");
  }
}

// SVD of a tall matrix (rows >= cols), factors returned column-major.
void svd_tall(const Matrix& in, ColMat& u, std::vector<double>& sigma,
              ColMat& v) {
  const std::size_t m = in.rows;
  const std::size_t n = in.cols;
  ColMat work(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) work.col(j)[i] = in(i, j);

  jacobi_orthogonalize(work, v);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j)
    norms[j] = std::sqrt(kernels::dot(work.col(j), work.col(j), m));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  sigma.resize(n);
  ColMat usorted(m, n);
  ColMat vsorted(n, n);
  std::size_t filled = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    sigma[j] = norms[src];
    for (std::size_t r = 0; r < n; ++r) vsorted.col(j)[r] = v.col(src)[r];
    if (norms[src] > 0.0) {
      for (std::size_t r = 0; r < m; ++r)
        usorted.col(j)[r] = work.col(src)[r] / norms[src];
      filled = j + 1;
    }
  }
  complete_basis(usorted, filled, n);
  u = std::move(usorted);
  v = std::move(vsorted);
}

void apply_sign_convention(SvdResult& f) {
  const std::size_t p = f.sigma.size();
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < f.u.rows; ++i) {
      const double a = std::fabs(f.u(i, k));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (f.u(arg, k) < 0.0) {
      for (std::size_t i = 0; i < f.u.rows; ++i) f.u(i, k) = -f.u(i, k);
      for (std::size_t j = 0; j < f.vt.cols; ++j) f.vt(k, j) = -f.vt(k, j);
    }
  }
}

}  // namespace

EnergyRatio::EnergyRatio(double e) : value(e) {
  if (!(e > 0.0) || !(e < 1.0))
    throw ValidationError("energy ratio must lie in (0, 1), got " +
                          std::to_string(e));
}

SvdResult svd(const Matrix& in) {
  if (in.rows < 1 || in.cols < 1)
    throw ValidationError("svd: matrix must be non-empty");
  validate_finite(in, "svd");

  const bool transpose = in.rows < in.cols;
  Matrix transposed_storage;
  if (transpose) transposed_storage = in.transposed();
  const Matrix& tall = transpose ? transposed_storage : in;

  const std::size_t p = std::min(in.rows, in.cols);
  ColMat ucm(tall.rows, tall.cols);
  ColMat vcm(tall.cols, tall.cols);
  std::vector<double> sigma;
  svd_tall(tall, ucm, sigma, vcm);

  SvdResult out;
  out.sigma = std::move(sigma);
  if (!transpose) {
    out.u = Matrix(in.rows, p);
    for (std::size_t i = 0; i < in.rows; ++i)
      for (std::size_t k = 0; k < p; ++k) out.u(i, k) = ucm.col(k)[i];
    out.vt = Matrix(p, in.cols);
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t j = 0; j < in.cols; ++j) out.vt(k, j) = vcm.col(k)[j];
  } else {
    // in = V1 * Sigma * U1^T where in^T = U1 * Sigma * V1^T.
    out.u = Matrix(in.rows, p);
    for (std::size_t i = 0; i < in.rows; ++i)
      for (std::size_t k = 0; k < p; ++k) out.u(i, k) = vcm.col(k)[i];
    out.vt = Matrix(p, in.cols);
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t j = 0; j < in.cols; ++j) out.vt(k, j) = ucm.col(k)[j];
  }
  apply_sign_convention(out);
  return out;
}

std::size_t truncation_rank(std::span<const double> sigma, EnergyRatio e) {
  const std::size_t p = sigma.size();
  for (std::size_t i = 0; i < p; ++i) {
    if (sigma[i] < 0.0)
      throw ValidationError("truncation_rank: negative singular value");
    if (i + 1 < p && sigma[i] < sigma[i + 1])
      throw ValidationError("truncation_rank: sigma not non-increasing");
  }
  std::vector<double> tail(p + 1, 0.0);
  for (std::size_t j = p; j-- > 0;)
    tail[j] = tail[j + 1] + sigma[j] * sigma[j];
  const double budget = e.value * tail[0];
  for (std::size_t k = 0; k <= p; ++k)
    if (tail[k] <= budget) return k;
  return p;  // unreachable: tail[p] == 0
}

std::pair<SvdResult, std::size_t> tsvd(const Matrix& m, EnergyRatio e) {
  SvdResult full = svd(m);
  const std::size_t k = truncation_rank(full.sigma, e);
  SvdResult cut;
  cut.u = Matrix(m.rows, k);
  cut.vt = Matrix(k, m.cols);
  cut.sigma.assign(full.sigma.begin(), full.sigma.begin() + k);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < k; ++j) cut.u(i, j) = full.u(i, j);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) cut.vt(i, j) = full.vt(i, j);
  return {std::move(cut), k};
}

double nuclear_norm(const Matrix& m) {
  const SvdResult f = svd(m);
  double s = 0.0;
  for (double v : f.sigma) s += v;
  return s;
}

Matrix nuclear_subgradient(const Matrix& m) {
  const SvdResult f = svd(m);
  Matrix out(m.rows, m.cols);
  if (f.sigma.empty() || f.sigma[0] == 0.0) return out;
  const double cutoff = kRankTol * f.sigma[0];
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t k = 0; k < f.sigma.size(); ++k) {
      if (!(f.sigma[k] > cutoff)) break;
      kernels::madd(out.row(i), f.vt.row(k), f.u(i, k), m.cols);
    }
  }
  return out;
}

Matrix reconstruct(const SvdResult& f) {
  Matrix out(f.u.rows, f.vt.cols);
  for (std::size_t i = 0; i < f.u.rows; ++i)
    for (std::size_t k = 0; k < f.sigma.size(); ++k)
      kernels::madd(out.row(i), f.vt.row(k), f.u(i, k) * f.sigma[k],
                    f.vt.cols);
  return out;
}

}  // namespace trp
