#include "trp/flops.hpp"

#include "trp/common.hpp"

namespace trp {

FlopsReport count_flops(const ModelSpec& spec, std::size_t in_ch,
                        std::size_t in_h, std::size_t in_w) {
  ModelSpec sized = spec;
  sized.in_ch = in_ch;
  sized.in_h = in_h;
  sized.in_w = in_w;
  validate(sized);  // also checks the given input shape fits the chain

  FlopsReport rep;
  std::size_t c = in_ch, h = in_h, w = in_w;
  for (std::size_t i = 0; i < sized.layers.size(); ++i) {
    FlopsLayer fl;
    const std::string base = "layer" + std::to_string(i);
    const LayerSpec& l = sized.layers[i];
    if (const auto* cv = std::get_if<ConvLayerSpec>(&l)) {
      const std::size_t oh =
          (h + 2 * cv->geom.pad_h - cv->kh) / cv->geom.stride_h + 1;
      const std::size_t ow =
          (w + 2 * cv->geom.pad_w - cv->kw) / cv->geom.stride_w + 1;
      fl.name = base + ".conv";
      fl.macs = cv->out_ch * cv->in_ch * cv->kh * cv->kw * oh * ow;
      fl.params = cv->out_ch * cv->in_ch * cv->kh * cv->kw + cv->out_ch;
      c = cv->out_ch;
      h = oh;
      w = ow;
    } else if (const auto* ln = std::get_if<LinearLayerSpec>(&l)) {
      fl.name = base + ".linear";
      fl.macs = ln->in * ln->out;
      fl.params = ln->in * ln->out + ln->out;
      c = ln->out;
    } else if (std::holds_alternative<ReluLayerSpec>(l)) {
      fl.name = base + ".relu";
    } else if (std::holds_alternative<MaxPoolLayerSpec>(l)) {
      fl.name = base + ".maxpool";
      h /= 2;
      w /= 2;
    } else {
      fl.name = base + ".flatten";
      c = c * h * w;
      h = 1;
      w = 1;
    }
    rep.total_macs += fl.macs;
    rep.total_params += fl.params;
    rep.layers.push_back(std::move(fl));
  }
  return rep;
}

double speedup(const FlopsReport& original, const FlopsReport& factorized) {
  if (factorized.total_macs == 0) {
    throw ValidationError("speedup: factorized model has zero MACs");
  }
  return static_cast<double>(original.total_macs) /
         static_cast<double>(factorized.total_macs);
}

nlohmann::json to_json(const FlopsReport& report) {
  nlohmann::json j;
  nlohmann::json layers = nlohmann::json::array();
  for (const FlopsLayer& l : report.layers) {
    layers.push_back({{"name", l.name}, {"macs", l.macs}, {"params", l.params}});
  }
  j["layers"] = std::move(layers);
  j["total_macs"] = report.total_macs;
  j["total_params"] = report.total_params;
  return j;
}

}  // namespace trp
