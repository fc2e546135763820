#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trp/data.hpp"
#include "trp/lowrank.hpp"
#include "trp/nn.hpp"

namespace trp {

struct TrpConfig {
  std::size_t m = 20;    // pruning period in iterations
  double e = 0.05;       // energy-preserving ratio, must lie in (0,1)
  double lambda = 0.0;   // nuclear-norm weight
  Scheme scheme = Scheme::channel;
  double base_lr = 0.1;
  double lr_decay = 0.1;
  // Epoch indices at which the lr is multiplied by lr_decay; empty means
  // "half and three quarters of the run".
  std::vector<std::size_t> lr_milestones;
  std::size_t epochs = 4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  bool trp_enabled = true;
  // Which conv layers participate in pruning: "all" convs with kh*kw > 1, or
  // "skip-first" to leave the first such conv untouched.
  std::string decompose_layer_filter = "all";
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::string model = "tiny-cnn";
  std::string dataset = "mnist";
  std::size_t train_subset = 10000;  // 0 = all
  std::size_t test_subset = 2000;    // 0 = all
};

void validate(const TrpConfig& cfg);
TrpConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrpConfig& cfg);
TrpConfig load_config(const std::string& path);

/// Effective milestone list (explicit ones, or the 50%/75% defaults).
std::vector<std::size_t> effective_milestones(const TrpConfig& cfg);
/// Step schedule: base_lr decayed once per milestone at or before `epoch`.
double lr_for_epoch(const TrpConfig& cfg, std::size_t epoch);

/// Indices of conv layers subject to pruning/regularization: every Conv2d
/// with a spatial kernel (kh*kw > 1), minus the first one under
/// "skip-first".
std::vector<std::size_t> participating_layers(const Model& model,
                                              const TrpConfig& cfg);

struct IterationHooks {
  /// Runs at pruning instants, after weights are replaced and before the
  /// gradient step; `ranks` are the retained ranks per participating layer.
  std::function<void(std::size_t t, Model& model,
                     const std::vector<std::size_t>& ranks)>
      after_prune;
};

struct IterOutcome {
  double loss = 0.0;
  double nuclear = 0.0;  // lambda * sum of participating nuclear norms
  bool pruned = false;
  std::vector<std::size_t> ranks;  // per participating layer when pruned
};

/// One TRP training step at iteration t: prune when t % m == 0 (t = 0
/// included), then take an SGD step on the batch gradient, plus the nuclear
/// sub-gradient term when lambda > 0. With trp_enabled=false and lambda=0
/// this is exactly a plain SGD step.
IterOutcome trp_iteration(Model& model, const Batch& batch, std::size_t t,
                          const TrpConfig& cfg, SgdState& opt,
                          const IterationHooks* hooks = nullptr);

/// lambda * dematricize(nuclear_subgradient(matricize(w, scheme))); zeros
/// when lambda == 0.
Tensor4 nuclear_gradient_term(const Tensor4& w, Scheme scheme, double lambda);

struct IterRecord {
  std::size_t t = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double nuclear = 0.0;
  // Most recent pruning's retained ranks and k/min(rows,cols) ratios, one
  // entry per participating layer; empty before the first pruning.
  std::vector<std::size_t> ranks;
  std::vector<double> rank_ratios;
};

struct TrainReport {
  std::vector<IterRecord> records;
  double final_test_accuracy = 0.0;  // percent
};

struct TrainResult {
  Model model;
  TrainReport report;
};

/// Deterministic training run: parameters are initialized from Rng(seed) and
/// epoch shuffles are drawn from Rng(seed + 1). When `metrics_csv` is
/// non-empty the per-iteration records are appended there, flushed once per
/// epoch.
TrainResult train(const ModelSpec& spec, const Dataset& data,
                  const TrpConfig& cfg, const std::string& metrics_csv = "",
                  const IterationHooks* hooks = nullptr);

struct ExportResult {
  Model model;
  std::vector<std::size_t> ranks;  // per factorized conv, in layer order
};

/// Replaces every participating conv with its two-layer factorization at the
/// config's scheme and energy; everything else is copied verbatim. The
/// original bias moves onto the second factor.
ExportResult final_prune_and_export(const Model& model, const TrpConfig& cfg);

void write_metrics_header(std::ostream& os);
void write_metrics_record(std::ostream& os, const IterRecord& rec);

}  // namespace trp
