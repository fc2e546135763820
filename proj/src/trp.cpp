#include "trp/trp.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include "trp/common.hpp"
#include "trp/format.hpp"
#include "trp/linalg.hpp"

namespace trp {

std::vector<std::size_t> participating_layers(const Model& model,
                                              const TrpConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const auto* conv = dynamic_cast<const Conv2d*>(&model.layer(i));
    if (conv && conv->w.dims[2] * conv->w.dims[3] > 1) out.push_back(i);
  }
  if (cfg.decompose_layer_filter == "skip-first" && !out.empty()) {
    out.erase(out.begin());
  }
  return out;
}

Tensor4 nuclear_gradient_term(const Tensor4& w, Scheme scheme, double lambda) {
  if (lambda < 0.0) throw ValidationError("nuclear term: lambda must be >= 0");
  if (lambda == 0.0) return Tensor4(w.dims[0], w.dims[1], w.dims[2], w.dims[3]);
  Matrix g = nuclear_subgradient(matricize(w, scheme));
  for (double& v : g.data) v *= lambda;
  return dematricize(g, w.dims, scheme);
}

namespace {

Conv2d& conv_at(Model& model, std::size_t idx) {
  auto* conv = dynamic_cast<Conv2d*>(&model.layer(idx));
  if (!conv) throw ValidationError("layer " + std::to_string(idx) +
                                   " is not a conv layer");
  return *conv;
}

const Conv2d& conv_at(const Model& model, std::size_t idx) {
  const auto* conv = dynamic_cast<const Conv2d*>(&model.layer(idx));
  if (!conv) throw ValidationError("layer " + std::to_string(idx) +
                                   " is not a conv layer");
  return *conv;
}

}  // namespace

IterOutcome trp_iteration(Model& model, const Batch& batch, std::size_t t,
                          const TrpConfig& cfg, SgdState& opt,
                          const IterationHooks* hooks) {
  IterOutcome out;
  const std::vector<std::size_t> participating = participating_layers(model, cfg);

  if (cfg.trp_enabled && t % cfg.m == 0) {
    out.pruned = true;
    for (std::size_t idx : participating) {
      Conv2d& conv = conv_at(model, idx);
      PruneResult pr = rank_prune(conv.w, cfg.scheme, EnergyRatio(cfg.e));
      if (pr.rank == 0) {
        throw NumericalError("trp: pruning degenerated to rank 0 at layer " +
                             std::to_string(idx));
      }
      conv.w = std::move(pr.tensor);
      out.ranks.push_back(pr.rank);
    }
    if (hooks && hooks->after_prune) hooks->after_prune(t, model, out.ranks);
  }

  const Tensor4 logits = model.forward(batch.inputs, /*cache=*/true);
  const SoftmaxResult sm =
      softmax_cross_entropy(logits_as_matrix(logits), batch.labels);
  out.loss = sm.loss;
  Tensor4 grad(logits.dims[0], logits.dims[1], 1, 1);
  grad.data = sm.grad_logits.data;
  model.backward(grad);

  if (cfg.lambda > 0.0) {
    for (std::size_t idx : participating) {
      Conv2d& conv = conv_at(model, idx);
      const Tensor4 term = nuclear_gradient_term(conv.w, cfg.scheme, cfg.lambda);
      for (std::size_t i = 0; i < term.size(); ++i) {
        conv.grad_w.data[i] += term.data[i];
      }
      out.nuclear += cfg.lambda * nuclear_norm(matricize(conv.w, cfg.scheme));
    }
  }

  opt.step(model.params());
  return out;
}

namespace {

Batch gather_batch(const Split& split, const std::vector<std::size_t>& order,
                   std::size_t start, std::size_t count) {
  const auto [n, c, h, w] = split.images.dims;
  (void)n;
  const std::size_t plane = c * h * w;
  Batch b;
  b.inputs = Tensor4(count, c, h, w);
  b.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = order[start + i];
    std::memcpy(b.inputs.data.data() + i * plane,
                split.images.data.data() + src * plane, plane * sizeof(double));
    b.labels[i] = split.labels[src];
  }
  return b;
}

std::string join_counts(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '|';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '|';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  os << "t,epoch,loss,nuclear,ranks,rank_ratios\n";
}

void write_metrics_record(std::ostream& os, const IterRecord& rec) {
  os << rec.t << ',' << rec.epoch << ',' << format_double(rec.loss) << ','
     << format_double(rec.nuclear) << ',' << join_counts(rec.ranks) << ','
     << join_doubles(rec.rank_ratios) << '\n';
}

TrainResult train(const ModelSpec& spec, const Dataset& data,
                  const TrpConfig& cfg, const std::string& metrics_csv,
                  const IterationHooks* hooks) {
  validate(cfg);
  const std::size_t n = data.train.count();
  if (n == 0) throw ValidationError("train: dataset has no training examples");

  Rng init_rng(cfg.seed);
  TrainResult res{Model(spec, init_rng), {}};
  Rng shuffle_rng(cfg.seed + 1);

  SgdState opt;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  {
    auto params = res.model.params();
    opt.init(params);
  }

  std::ofstream metrics;
  if (!metrics_csv.empty()) {
    metrics.open(metrics_csv, std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics csv " + metrics_csv);
    write_metrics_header(metrics);
  }

  // Matricized min-dimensions of the participating layers, for rank ratios.
  const auto participating = participating_layers(res.model, cfg);
  std::vector<double> min_dims;
  for (std::size_t idx : participating) {
    const auto& d = conv_at(res.model, idx).w.dims;
    const std::size_t rows =
        cfg.scheme == Scheme::channel ? d[0] : d[1] * d[2];
    const std::size_t cols =
        cfg.scheme == Scheme::channel ? d[1] * d[2] * d[3] : d[3] * d[0];
    min_dims.push_back(static_cast<double>(std::min(rows, cols)));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> last_ranks;
  std::vector<double> last_ratios;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = lr_for_epoch(cfg, epoch);
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n - start);
      const Batch batch = gather_batch(data.train, order, start, bs);
      const IterOutcome o = trp_iteration(res.model, batch, t, cfg, opt, hooks);
      if (o.pruned) {
        last_ranks = o.ranks;
        last_ratios.clear();
        for (std::size_t i = 0; i < o.ranks.size(); ++i) {
          last_ratios.push_back(static_cast<double>(o.ranks[i]) / min_dims[i]);
        }
      }
      res.report.records.push_back(
          {t, epoch, o.loss, o.nuclear, last_ranks, last_ratios});
      if (metrics.is_open()) {
        write_metrics_record(metrics, res.report.records.back());
      }
      ++t;
    }
    if (metrics.is_open()) metrics.flush();
  }

  if (data.test.count() > 0) {
    res.report.final_test_accuracy =
        top1_accuracy(res.model, data.test.images, data.test.labels);
  }
  return res;
}

ExportResult final_prune_and_export(const Model& model, const TrpConfig& cfg) {
  validate(cfg);
  const auto participating = participating_layers(model, cfg);

  ModelSpec out_spec;
  out_spec.name = model.spec().name + "-factorized";
  out_spec.in_ch = model.spec().in_ch;
  out_spec.in_h = model.spec().in_h;
  out_spec.in_w = model.spec().in_w;
  out_spec.num_classes = model.spec().num_classes;

  struct ConvFill {
    std::size_t layer;  // index in the output spec
    Tensor4 w;
    std::vector<double> bias;
  };
  std::vector<ConvFill> fills;
  ExportResult res;

  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const bool split = std::find(participating.begin(), participating.end(),
                                 i) != participating.end();
    if (split) {
      const Conv2d& conv = conv_at(model, i);
      FactorizedConv f =
          factorize(conv.w, cfg.scheme, EnergyRatio(cfg.e), conv.geom());
      res.ranks.push_back(f.rank);
      const auto& d1 = f.first_w.dims;
      const auto& d2 = f.second_w.dims;
      out_spec.layers.push_back(
          ConvLayerSpec{d1[0], d1[1], d1[2], d1[3], f.first_geom});
      fills.push_back({out_spec.layers.size() - 1, std::move(f.first_w),
                       std::vector<double>(d1[0], 0.0)});
      out_spec.layers.push_back(
          ConvLayerSpec{d2[0], d2[1], d2[2], d2[3], f.second_geom});
      fills.push_back(
          {out_spec.layers.size() - 1, std::move(f.second_w), conv.bias});
    } else {
      out_spec.layers.push_back(model.spec().layers[i]);
      const Layer& layer = model.layer(i);
      if (const auto* conv = dynamic_cast<const Conv2d*>(&layer)) {
        fills.push_back({out_spec.layers.size() - 1, conv->w, conv->bias});
      } else if (const auto* lin = dynamic_cast<const Linear*>(&layer)) {
        Tensor4 w(lin->w.rows, lin->w.cols, 1, 1);
        w.data = lin->w.data;
        fills.push_back({out_spec.layers.size() - 1, std::move(w), lin->bias});
      }
    }
  }

  res.model = Model(out_spec);
  for (ConvFill& f : fills) {
    Layer& layer = res.model.layer(f.layer);
    if (auto* conv = dynamic_cast<Conv2d*>(&layer)) {
      if (!conv->w.same_shape(f.w)) {
        throw ValidationError("export: factor shape mismatch at layer " +
                              std::to_string(f.layer));
      }
      conv->w = std::move(f.w);
      conv->bias = std::move(f.bias);
    } else if (auto* lin = dynamic_cast<Linear*>(&layer)) {
      lin->w.data = std::move(f.w.data);
      lin->bias = std::move(f.bias);
    }
  }
  return res;
}

}  // namespace trp
