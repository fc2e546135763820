#pragma once

#include <span>
#include <utility>
#include <vector>

#include "trp/matrix.hpp"

namespace trp {

/// Thin SVD factors: m = u * diag(sigma) * vt with p = min(rows, cols),
/// u: rows x p, vt: p x cols, sigma non-increasing and non-negative.
struct SvdResult {
  Matrix u;
  std::vector<double> sigma;
  Matrix vt;
};

/// Energy-preserving ratio, valid only on the open interval (0, 1).
struct EnergyRatio {
  double value;
  explicit EnergyRatio(double e);
};

/// One-sided Jacobi SVD (cyclic sweeps). Deterministic: fixed sweep order,
/// fixed sign convention (largest-magnitude entry of each left singular
/// vector is non-negative). Throws ValidationError on non-finite or empty
/// input, NumericalError if the sweep cap is hit before all column pairs
/// are orthogonal to relative tolerance 1e-14.
SvdResult svd(const Matrix& m);

/// Smallest k such that the truncated tail energy sum_{j>=k} sigma[j]^2 is
/// at most e times the total energy. All-zero sigma gives k = 0.
std::size_t truncation_rank(std::span<const double> sigma, EnergyRatio e);

/// SVD truncated to the energy rank: factors keep exactly k columns/rows.
std::pair<SvdResult, std::size_t> tsvd(const Matrix& m, EnergyRatio e);

/// Sum of singular values.
double nuclear_norm(const Matrix& m);

/// U_tru * V_tru^T with factors truncated to the numerical rank
/// (sigma_i > 1e-10 * sigma_0). The zero matrix maps to the zero matrix.
Matrix nuclear_subgradient(const Matrix& m);

/// u * diag(sigma) * vt.
Matrix reconstruct(const SvdResult& f);

}  // namespace trp
