#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "trp/common.hpp"
#include "trp/nn.hpp"

namespace trp {

// Checkpoint load failures, distinguished by kind.
struct BadMagicError : IoError {
  using IoError::IoError;
};
struct TruncatedError : IoError {
  using IoError::IoError;
};
struct ShapeMismatchError : IoError {
  using IoError::IoError;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

struct Checkpoint {
  Model model;
  nlohmann::json metadata;
  std::optional<SgdState> optimizer;
};

/// File layout: magic "TRP1"; u32 LE length-prefixed JSON header (version,
/// architecture, metadata, tensor directory); then one record per directory
/// entry: u16 LE name length, name, u8 ndims, ndims x u32 LE dims, f64 LE
/// row-major values. Optimizer velocities, when present, follow the
/// parameters as "opt.<param>" records.
void save_checkpoint(Model& model, const std::string& path,
                     const nlohmann::json& metadata = nlohmann::json::object(),
                     const SgdState* optimizer = nullptr);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace trp
