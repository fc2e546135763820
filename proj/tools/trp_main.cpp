#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trp/checkpoint.hpp"
#include "trp/common.hpp"
#include "trp/compare.hpp"
#include "trp/data.hpp"
#include "trp/flops.hpp"
#include "trp/format.hpp"
#include "trp/trp.hpp"

namespace {

// Exit codes: 0 success, 1 usage, 2 validation, 3 numerical/runtime.
constexpr int kUsageExit = 1;
constexpr int kValidationExit = 2;
constexpr int kRuntimeExit = 3;

trp::Dataset load_dataset(const std::string& kind, const std::string& dir,
                          std::uint64_t seed, std::size_t train_subset,
                          std::size_t test_subset) {
  if (kind == "mnist") {
    return trp::load_mnist_idx(dir, train_subset, test_subset);
  }
  if (kind == "cifar10") {
    return trp::load_cifar10_binary(dir, train_subset, test_subset);
  }
  if (kind == "blobs") {
    const std::size_t per_class =
        std::max<std::size_t>(1, (train_subset ? train_subset : 800) / 4);
    return trp::synthetic_blobs(seed, per_class, 4, 12);
  }
  throw trp::ValidationError("unknown dataset \"" + kind +
                             "\"; available: blobs, cifar10, mnist");
}

std::vector<double> parse_double_list(const std::string& text,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw trp::ValidationError(std::string(what) + ": cannot parse \"" +
                                 item + "\"");
    }
  }
  if (out.empty()) {
    throw trp::ValidationError(std::string(what) + ": empty list");
  }
  return out;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path, const std::string& metrics_path) {
  const trp::TrpConfig cfg = trp::load_config(config_path);
  const trp::Dataset data = load_dataset(cfg.dataset, data_dir, cfg.seed,
                                         cfg.train_subset, cfg.test_subset);
  const trp::ModelSpec spec =
      trp::model_zoo(cfg.model, data.train.images.dims[1],
                     data.train.images.dims[2], data.train.images.dims[3],
                     data.num_classes);
  trp::TrainResult res = trp::train(spec, data, cfg, metrics_path);

  nlohmann::json meta;
  meta["config"] = trp::config_to_json(cfg);
  meta["seed"] = cfg.seed;
  meta["iterations"] = res.report.records.size();
  trp::save_checkpoint(res.model, out_path, meta);

  std::cout << "trained " << spec.name << " for "
            << res.report.records.size() << " iterations, top1 "
            << trp::format_double(res.report.final_test_accuracy)
            << ", saved " << out_path << "\n";
  return 0;
}

int run_decompose(const std::string& in_path, const std::string& scheme_name,
                  double energy, const std::string& out_path) {
  trp::Checkpoint ck = trp::load_checkpoint(in_path);
  trp::TrpConfig cfg;
  if (ck.metadata.contains("config")) {
    cfg = trp::config_from_json(ck.metadata.at("config"));
  }
  cfg.scheme = trp::scheme_from_string(scheme_name);
  cfg.e = energy;
  trp::validate(cfg);

  trp::ExportResult res = trp::final_prune_and_export(ck.model, cfg);

  nlohmann::json meta = ck.metadata;
  // Keep the earliest architecture so speedup stays relative to the original.
  if (!meta.contains("original_model")) {
    meta["original_model"] = trp::spec_to_json(ck.model.spec());
  }
  meta["decompose"] = {{"scheme", trp::to_string(cfg.scheme)},
                       {"energy", cfg.e},
                       {"ranks", res.ranks}};
  trp::save_checkpoint(res.model, out_path, meta);

  std::cout << "factorized " << res.ranks.size() << " conv layers, ranks";
  for (std::size_t r : res.ranks) std::cout << ' ' << r;
  std::cout << ", saved " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& dataset, std::uint64_t seed,
             std::size_t limit) {
  trp::Checkpoint ck = trp::load_checkpoint(model_path);
  const trp::Dataset data = load_dataset(dataset, data_dir, seed, 0, limit);
  const double acc = trp::top1_accuracy(ck.model, data.test.images,
                                        data.test.labels);
  std::cout << "top1 " << trp::format_double(acc) << "\n";
  return 0;
}

int run_flops(const std::string& model_path, const std::string& shape_text) {
  trp::Checkpoint ck = trp::load_checkpoint(model_path);
  const std::vector<double> nums = parse_double_list(shape_text, "--input-shape");
  if (nums.size() != 3) {
    throw trp::ValidationError("--input-shape must be c,h,w");
  }
  for (double v : nums) {
    if (v < 1 || v != static_cast<std::size_t>(v)) {
      throw trp::ValidationError("--input-shape must hold positive integers");
    }
  }
  const auto c = static_cast<std::size_t>(nums[0]);
  const auto h = static_cast<std::size_t>(nums[1]);
  const auto w = static_cast<std::size_t>(nums[2]);

  const trp::FlopsReport rep = trp::count_flops(ck.model.spec(), c, h, w);
  nlohmann::json j = trp::to_json(rep);
  j["model"] = ck.model.spec().name;
  if (ck.metadata.contains("original_model")) {
    const trp::ModelSpec original =
        trp::spec_from_json(ck.metadata.at("original_model"));
    const trp::FlopsReport orig_rep = trp::count_flops(original, c, h, w);
    j["original_total_macs"] = orig_rep.total_macs;
    j["speedup"] = trp::speedup(orig_rep, rep);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_compare(const std::string& config_path, const std::string& data_dir,
                const std::string& energies_text, const std::string& out_path) {
  const trp::TrpConfig cfg = trp::load_config(config_path);
  const std::vector<double> energies =
      parse_double_list(energies_text, "--energies");
  const trp::Dataset data = load_dataset(cfg.dataset, data_dir, cfg.seed,
                                         cfg.train_subset, cfg.test_subset);
  const trp::ModelSpec spec =
      trp::model_zoo(cfg.model, data.train.images.dims[1],
                     data.train.images.dims[2], data.train.images.dims[3],
                     data.num_classes);
  const double nu_lambda = cfg.lambda > 0.0 ? cfg.lambda : 3e-4;
  const std::vector<trp::CompareRow> rows =
      trp::compare_harness(spec, data, cfg, energies, nu_lambda);

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw trp::IoError("cannot write " + out_path);
  trp::write_compare_csv(out, rows);
  out.flush();
  if (!out) throw trp::IoError("short write to " + out_path);

  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trained Rank Pruning: low-rank CNN training and export"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, metrics_path;
  auto* train = app.add_subcommand("train", "Train a model from a config");
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--data", data_dir, "dataset directory");
  train->add_option("--out", out_path, "output checkpoint")->required();
  train->add_option("--metrics", metrics_path, "per-iteration metrics CSV");

  std::string in_path, scheme_name = "channel";
  double energy = 0.05;
  auto* decompose =
      app.add_subcommand("decompose", "Factorize a checkpoint's conv layers");
  decompose->add_option("--in", in_path, "input checkpoint")->required();
  decompose->add_option("--scheme", scheme_name, "channel|spatial");
  decompose->add_option("--energy", energy, "energy-preserving ratio e");
  decompose->add_option("--out", out_path, "output checkpoint")->required();

  std::string model_path, dataset = "mnist";
  std::uint64_t seed = 1;
  std::size_t limit = 0;
  auto* eval = app.add_subcommand("eval", "Report top-1 accuracy on a test set");
  eval->add_option("--model", model_path, "checkpoint")->required();
  eval->add_option("--data", data_dir, "dataset directory");
  eval->add_option("--dataset", dataset, "blobs|cifar10|mnist");
  eval->add_option("--seed", seed, "seed for synthetic datasets");
  eval->add_option("--limit", limit, "test subset size (0 = all)");

  std::string shape_text = "1,28,28";
  auto* flops = app.add_subcommand("flops", "Print a FLOPs report as JSON");
  flops->add_option("--model", model_path, "checkpoint")->required();
  flops->add_option("--input-shape", shape_text, "c,h,w");

  std::string energies_text;
  auto* compare = app.add_subcommand(
      "compare", "Baseline vs TRP vs TRP+Nu at each truncation energy");
  compare->add_option("--config", config_path, "JSON config")->required();
  compare->add_option("--data", data_dir, "dataset directory");
  compare->add_option("--energies", energies_text, "comma-separated e values")
      ->required();
  compare->add_option("--out", out_path, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kUsageExit;
  }

  try {
    if (app.got_subcommand(train)) {
      return run_train(config_path, data_dir, out_path, metrics_path);
    }
    if (app.got_subcommand(decompose)) {
      return run_decompose(in_path, scheme_name, energy, out_path);
    }
    if (app.got_subcommand(eval)) {
      return run_eval(model_path, data_dir, dataset, seed, limit);
    }
    if (app.got_subcommand(flops)) {
      return run_flops(model_path, shape_text);
    }
    return run_compare(config_path, data_dir, energies_text, out_path);
  } catch (const trp::ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << "\n";
    return kValidationExit;
  } catch (const trp::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kRuntimeExit;
  } catch (const trp::IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return kRuntimeExit;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return kRuntimeExit;
  }
}
