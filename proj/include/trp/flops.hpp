#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trp/nn.hpp"

namespace trp {

struct FlopsLayer {
  std::string name;
  std::size_t macs = 0;
  std::size_t params = 0;
};

/// Multiply-accumulate counts for one forward pass (1 MAC = 1 FLOP unit).
/// Conv: n*c*kh*kw*Hout*Wout; linear: in*out; relu/pool/flatten: 0.
struct FlopsReport {
  std::vector<FlopsLayer> layers;
  std::size_t total_macs = 0;
  std::size_t total_params = 0;
};

FlopsReport count_flops(const ModelSpec& spec, std::size_t in_ch,
                        std::size_t in_h, std::size_t in_w);

/// total_original / total_factorized.
double speedup(const FlopsReport& original, const FlopsReport& factorized);

nlohmann::json to_json(const FlopsReport& report);

}  // namespace trp
