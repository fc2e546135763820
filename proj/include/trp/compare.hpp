#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "trp/data.hpp"
#include "trp/trp.hpp"

namespace trp {

struct CompareRow {
  std::string method;   // baseline | trp | trp+nu
  std::string m;        // pruning period, "inf" for the baseline
  double energy = 0.0;
  double top1_before = 0.0;  // percent, trained model
  double top1_after = 0.0;   // percent, after factorization at `energy`
  double drop = 0.0;
  double speedup = 0.0;
  std::vector<std::size_t> ranks;  // retained rank per factorized conv
};

/// Trains baseline (TRP off), TRP, and TRP+Nu models with the identical seed
/// and schedule from `cfg`, then factorizes each at every energy in
/// `energies` and records paired accuracy/speedup rows (3 methods x energies,
/// in that nesting order). `nu_lambda` is used for the trp+nu run; the
/// baseline and trp runs use lambda = 0.
std::vector<CompareRow> compare_harness(const ModelSpec& spec,
                                        const Dataset& data, TrpConfig cfg,
                                        const std::vector<double>& energies,
                                        double nu_lambda = 3e-4);

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);

}  // namespace trp
