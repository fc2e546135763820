#include "trp/lowrank.hpp"

#include <cmath>
#include <span>
#include <utility>

#include "trp/common.hpp"

namespace trp {
namespace {

// D(.) must be a fixed point: re-apply the rank rule to the kept spectrum
// until it stops shrinking, so pruning an already-pruned tensor is a no-op.
std::pair<SvdResult, std::size_t> stable_tsvd(const Matrix& m, EnergyRatio e) {
  const SvdResult full = svd(m);
  std::size_t k = truncation_rank(full.sigma, e);
  for (;;) {
    const std::size_t next =
        truncation_rank(std::span(full.sigma.data(), k), e);
    if (next == k) break;
    k = next;
  }
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

}  // namespace

Scheme scheme_from_string(const std::string& s) {
  if (s == "channel") return Scheme::channel;
  if (s == "spatial") return Scheme::spatial;
  throw ValidationError("unknown scheme '" + s + "' (expected channel|spatial)");
}

const char* to_string(Scheme s) {
  return s == Scheme::channel ? "channel" : "spatial";
}

Matrix matricize(const Tensor4& w, Scheme scheme) {
  validate_finite(w, "matricize");
  const auto [n, c, kh, kw] = w.dims;
  if (scheme == Scheme::channel) {
    // Row-major flatten of (c, kh, kw): column (ci*kh + hi)*kw + wi.
    Matrix m(n, c * kh * kw);
    m.data = w.data;
    return m;
  }
  Matrix m(c * kh, kw * n);
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t hi = 0; hi < kh; ++hi)
        for (std::size_t wi = 0; wi < kw; ++wi)
          m(ci * kh + hi, wi * n + ni) = w.at(ni, ci, hi, wi);
  return m;
}

Tensor4 dematricize(const Matrix& m, const std::array<std::size_t, 4>& dims,
                    Scheme scheme) {
  const auto [n, c, kh, kw] = dims;
  const std::size_t want_rows = scheme == Scheme::channel ? n : c * kh;
  const std::size_t want_cols = scheme == Scheme::channel ? c * kh * kw : kw * n;
  if (m.rows != want_rows || m.cols != want_cols)
    throw ValidationError("dematricize: matrix is " + std::to_string(m.rows) +
                          "x" + std::to_string(m.cols) + " but scheme expects " +
                          std::to_string(want_rows) + "x" +
                          std::to_string(want_cols));
  Tensor4 w(n, c, kh, kw);
  if (scheme == Scheme::channel) {
    w.data = m.data;
    return w;
  }
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t hi = 0; hi < kh; ++hi)
        for (std::size_t wi = 0; wi < kw; ++wi)
          w.at(ni, ci, hi, wi) = m(ci * kh + hi, wi * n + ni);
  return w;
}

PruneResult rank_prune(const Tensor4& w, Scheme scheme, EnergyRatio e) {
  const Matrix m = matricize(w, scheme);
  auto [factors, k] = stable_tsvd(m, e);
  return {dematricize(reconstruct(factors), w.dims, scheme), k};
}

FactorizedConv factorize(const Tensor4& w, Scheme scheme, EnergyRatio e,
                         const ConvGeom& geom) {
  const auto [n, c, kh, kw] = w.dims;
  const Matrix m = matricize(w, scheme);
  auto [f, k] = stable_tsvd(m, e);
  if (k == 0)
    throw NumericalError(
        "factorize: truncation left rank 0 (weight energy entirely removed)");

  std::vector<double> root(k);
  for (std::size_t i = 0; i < k; ++i) root[i] = std::sqrt(f.sigma[i]);

  FactorizedConv out;
  out.rank = k;
  out.scheme = scheme;
  if (scheme == Scheme::channel) {
    out.first_w = Tensor4(k, c, kh, kw);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t hi = 0; hi < kh; ++hi)
          for (std::size_t wi = 0; wi < kw; ++wi)
            out.first_w.at(r, ci, hi, wi) =
                root[r] * f.vt(r, (ci * kh + hi) * kw + wi);
    out.second_w = Tensor4(n, k, 1, 1);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t r = 0; r < k; ++r)
        out.second_w.at(ni, r, 0, 0) = f.u(ni, r) * root[r];
    out.first_geom = geom;
    out.second_geom = ConvGeom{1, 1, 0, 0};
  } else {
    out.first_w = Tensor4(k, c, kh, 1);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t hi = 0; hi < kh; ++hi)
          out.first_w.at(r, ci, hi, 0) = f.u(ci * kh + hi, r) * root[r];
    out.second_w = Tensor4(n, k, 1, kw);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t wi = 0; wi < kw; ++wi)
          out.second_w.at(ni, r, 0, wi) = root[r] * f.vt(r, wi * n + ni);
    out.first_geom = ConvGeom{geom.stride_h, 1, geom.pad_h, 0};
    out.second_geom = ConvGeom{1, geom.stride_w, 0, geom.pad_w};
  }
  return out;
}

}  // namespace trp
