#include <fstream>
#include <set>

#include "trp/common.hpp"
#include "trp/trp.hpp"

namespace trp {

void validate(const TrpConfig& cfg) {
  if (cfg.m < 1) throw ValidationError("config: m must be >= 1");
  EnergyRatio ratio(cfg.e);  // throws unless 0 < e < 1
  (void)ratio;
  if (cfg.lambda < 0.0) throw ValidationError("config: lambda must be >= 0");
  if (!(cfg.base_lr > 0.0)) throw ValidationError("config: base_lr must be > 0");
  if (!(cfg.lr_decay > 0.0)) throw ValidationError("config: lr_decay must be > 0");
  for (std::size_t i = 1; i < cfg.lr_milestones.size(); ++i) {
    if (cfg.lr_milestones[i] <= cfg.lr_milestones[i - 1]) {
      throw ValidationError("config: lr_milestones must be strictly increasing");
    }
  }
  if (cfg.epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (cfg.decompose_layer_filter != "all" &&
      cfg.decompose_layer_filter != "skip-first") {
    throw ValidationError(
        "config: decompose_layer_filter must be \"all\" or \"skip-first\"");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ValidationError("config: momentum must lie in [0, 1)");
  }
  if (cfg.weight_decay < 0.0) {
    throw ValidationError("config: weight_decay must be >= 0");
  }
}

TrpConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  static const std::set<std::string> known = {
      "m",          "e",           "lambda",     "scheme",
      "base_lr",    "lr_decay",    "lr_milestones", "epochs",
      "batch_size", "seed",        "trp_enabled",   "decompose_layer_filter",
      "momentum",   "weight_decay", "model",        "dataset",
      "train_subset", "test_subset"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ValidationError("config: unknown key \"" + key + "\"");
    }
  }

  TrpConfig cfg;
  try {
    if (j.contains("m")) cfg.m = j.at("m").get<std::size_t>();
    if (j.contains("e")) cfg.e = j.at("e").get<double>();
    if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
    if (j.contains("scheme")) {
      cfg.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    }
    if (j.contains("base_lr")) cfg.base_lr = j.at("base_lr").get<double>();
    if (j.contains("lr_decay")) cfg.lr_decay = j.at("lr_decay").get<double>();
    if (j.contains("lr_milestones")) {
      cfg.lr_milestones =
          j.at("lr_milestones").get<std::vector<std::size_t>>();
    }
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) {
      cfg.batch_size = j.at("batch_size").get<std::size_t>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("trp_enabled")) {
      cfg.trp_enabled = j.at("trp_enabled").get<bool>();
    }
    if (j.contains("decompose_layer_filter")) {
      cfg.decompose_layer_filter =
          j.at("decompose_layer_filter").get<std::string>();
    }
    if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
    if (j.contains("weight_decay")) {
      cfg.weight_decay = j.at("weight_decay").get<double>();
    }
    if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
    if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<std::string>();
    if (j.contains("train_subset")) {
      cfg.train_subset = j.at("train_subset").get<std::size_t>();
    }
    if (j.contains("test_subset")) {
      cfg.test_subset = j.at("test_subset").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

nlohmann::json config_to_json(const TrpConfig& cfg) {
  nlohmann::json j;
  j["m"] = cfg.m;
  j["e"] = cfg.e;
  j["lambda"] = cfg.lambda;
  j["scheme"] = to_string(cfg.scheme);
  j["base_lr"] = cfg.base_lr;
  j["lr_decay"] = cfg.lr_decay;
  j["lr_milestones"] = cfg.lr_milestones;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["trp_enabled"] = cfg.trp_enabled;
  j["decompose_layer_filter"] = cfg.decompose_layer_filter;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["model"] = cfg.model;
  j["dataset"] = cfg.dataset;
  j["train_subset"] = cfg.train_subset;
  j["test_subset"] = cfg.test_subset;
  return j;
}

TrpConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<std::size_t> effective_milestones(const TrpConfig& cfg) {
  if (!cfg.lr_milestones.empty()) return cfg.lr_milestones;
  std::vector<std::size_t> m;
  if (cfg.epochs / 2 > 0) m.push_back(cfg.epochs / 2);
  if (cfg.epochs * 3 / 4 > cfg.epochs / 2) m.push_back(cfg.epochs * 3 / 4);
  return m;
}

double lr_for_epoch(const TrpConfig& cfg, std::size_t epoch) {
  double lr = cfg.base_lr;
  for (std::size_t ms : effective_milestones(cfg)) {
    if (epoch >= ms) lr *= cfg.lr_decay;
  }
  return lr;
}

}  // namespace trp
