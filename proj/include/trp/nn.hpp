#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trp/lowrank.hpp"
#include "trp/matrix.hpp"
#include "trp/rng.hpp"
#include "trp/tensor4.hpp"

namespace trp {

// ---------------------------------------------------------------------------
// Layer math as free functions. Deterministic evaluation order throughout:
// convolution accumulates per output in (in_channel, kr, ks) order starting
// from the bias; out-of-range taps contribute an explicit zero product so
// padded and bounds-checked paths round identically.
// ---------------------------------------------------------------------------

Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& w,
                       std::span<const double> bias, const ConvGeom& geom);

struct ConvGrads {
  Tensor4 input;
  Tensor4 weights;
  std::vector<double> bias;
};

ConvGrads conv2d_backward(const Tensor4& grad_out, const Tensor4& x,
                          const Tensor4& w, const ConvGeom& geom);

struct SoftmaxResult {
  double loss;
  Matrix grad_logits;
};

/// Mean cross-entropy over the batch, max-subtraction stabilized. Gradient
/// rows sum to zero.
SoftmaxResult softmax_cross_entropy(const Matrix& logits,
                                    std::span<const int> labels);

// ---------------------------------------------------------------------------
// Model descriptors
// ---------------------------------------------------------------------------

struct ConvLayerSpec {
  std::size_t out_ch = 0, in_ch = 0, kh = 0, kw = 0;
  ConvGeom geom;
};
struct LinearLayerSpec {
  std::size_t out = 0, in = 0;
};
struct ReluLayerSpec {};
struct MaxPoolLayerSpec {};  // 2x2 window, stride 2
struct FlattenLayerSpec {};

using LayerSpec = std::variant<ConvLayerSpec, LinearLayerSpec, ReluLayerSpec,
                               MaxPoolLayerSpec, FlattenLayerSpec>;

struct ModelSpec {
  std::string name;
  std::size_t in_ch = 1, in_h = 0, in_w = 0, num_classes = 0;
  std::vector<LayerSpec> layers;
};

/// Walks the whole shape chain; throws ValidationError on the first
/// inconsistency (also requires the spec to end in a Linear producing
/// num_classes outputs).
void validate(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Runtime layers
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// `cache` keeps whatever backward() needs; evaluation passes skip it.
  virtual Tensor4 forward(const Tensor4& x, bool cache) = 0;
  virtual Tensor4 backward(const Tensor4& grad_out) = 0;
  virtual void collect_params(std::size_t layer_index,
                              std::vector<ParamRef>& out) {
    (void)layer_index;
    (void)out;
  }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2d final : public Layer {
 public:
  explicit Conv2d(const ConvLayerSpec& spec);

  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  void collect_params(std::size_t layer_index,
                      std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;

  const ConvGeom& geom() const { return geom_; }

  Tensor4 w;
  std::vector<double> bias;
  Tensor4 grad_w;
  std::vector<double> grad_bias;

 private:
  ConvGeom geom_;
  Tensor4 cached_x_;
};

class Linear final : public Layer {
 public:
  explicit Linear(const LinearLayerSpec& spec);

  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  void collect_params(std::size_t layer_index,
                      std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;

  Matrix w;  // out x in
  std::vector<double> bias;
  Matrix grad_w;
  std::vector<double> grad_bias;

 private:
  Tensor4 cached_x_;
};

class ReLU final : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  Tensor4 cached_x_;
};

/// 2x2 max pooling, stride 2, window fully inside; ties broken by the first
/// occurrence in row-major window order.
class MaxPool2x2 final : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  std::array<std::size_t, 4> in_dims_{};
  std::vector<std::size_t> argmax_;
};

class Flatten final : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  std::array<std::size_t, 4> in_dims_{};
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Model {
 public:
  Model() = default;
  /// Zero-initialized parameters (checkpoint loading fills them in).
  explicit Model(ModelSpec spec);
  /// Kaiming-uniform fan-in initialization from the seeded generator.
  Model(ModelSpec spec, Rng& rng);
  Model(const Model& o);
  Model& operator=(const Model& o);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  Tensor4 forward(const Tensor4& x, bool cache = false);
  /// Backward through all layers; parameter gradients end up in the layers.
  void backward(const Tensor4& grad_logits);

  std::vector<ParamRef> params();

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// (b, K, 1, 1) logits viewed as a b x K matrix.
Matrix logits_as_matrix(const Tensor4& t);

double top1_accuracy(Model& model, const Tensor4& images,
                     std::span<const int> labels, std::size_t batch_size = 256);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct Batch {
  Tensor4 inputs;
  std::vector<int> labels;
};

/// SGD with heavy-ball momentum: v <- momentum*v + (g + weight_decay*w),
/// w <- w - lr*v.
struct SgdState {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::vector<double>> velocity;

  void init(const std::vector<ParamRef>& params);
  void step(const std::vector<ParamRef>& params);
};

}  // namespace trp
