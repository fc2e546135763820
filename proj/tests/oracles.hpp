#pragma once

#include <functional>
#include <span>
#include <vector>

#include "trp/data.hpp"
#include "trp/lowrank.hpp"
#include "trp/matrix.hpp"
#include "trp/nn.hpp"
#include "trp/tensor4.hpp"
#include "trp/trp.hpp"

// Independent reference implementations used to check the library. These are
// deliberately written the slow, obvious way and share no numerical code with
// the implementations under test.
namespace trp::oracles {

/// Eigenvalues of a symmetric matrix (classical two-sided Jacobi), sorted
/// descending.
std::vector<double> symmetric_eigenvalues(Matrix a);

/// Singular values of a via the Gram matrix route: sqrt of eigenvalues of
/// AᵀA (or AAᵀ, whichever is smaller), descending.
std::vector<double> singular_values_via_gram(const Matrix& a);

/// Smallest k with sum_{j>=k} sigma_j^2 <= e * sum sigma^2, found by trying
/// every k from 0 upward and checking the inequality directly.
std::size_t truncation_rank_enumerated(std::span<const double> sigma, double e);

/// Bounds-checked six-loop convolution.
Tensor4 naive_conv_forward(const Tensor4& x, const Tensor4& w,
                           std::span<const double> bias, const ConvGeom& geom);

/// Central finite differences of `loss` with respect to x, step h.
std::vector<double> fd_gradient(std::vector<double>& x,
                                const std::function<double()>& loss, double h);

/// |a - b| / max(1, |a|, |b|): relative for large values, absolute near zero.
double rel_err(double a, double b);
double max_rel_err(std::span<const double> a, std::span<const double> b);

/// Plain-loop momentum SGD, the recurrence written out element by element.
void reference_sgd_update(std::vector<double>& w, std::vector<double>& v,
                          const std::vector<double>& g, double lr,
                          double momentum, double weight_decay);

/// A from-scratch SGD training loop (no pruning, no regularizer) mirroring
/// the documented trainer contract: init from Rng(seed), shuffles from
/// Rng(seed + 1), step schedule, sequential batches.
Model reference_sgd_train(const ModelSpec& spec, const Dataset& data,
                          const TrpConfig& cfg);

/// Rank-1 truncation of a 2x2 matrix from the closed-form eigendecomposition
/// of AᵀA.
Matrix rank1_truncation_2x2(const Matrix& a);

/// Multinomial logistic regression on flattened images by full-batch gradient
/// descent; returns train accuracy in [0, 1].
double linear_probe_accuracy(const Split& split, std::size_t classes,
                             std::size_t steps = 300, double lr = 0.5);

}  // namespace trp::oracles
