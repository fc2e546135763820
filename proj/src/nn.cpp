#include "trp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "trp/common.hpp"
#include "trp/kernels.hpp"

namespace trp {

namespace {

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t pad, const char* axis) {
  if (in + 2 * pad < k) {
    throw ValidationError(std::string("conv: kernel larger than padded input on ") +
                          axis + " axis");
  }
  return (in + 2 * pad - k) / stride + 1;
}

/// Zero-padded copy of an activation tensor.
Tensor4 pad_input(const Tensor4& x, std::size_t ph, std::size_t pw) {
  if (ph == 0 && pw == 0) return x;
  const auto [b, c, h, w] = x.dims;
  Tensor4 xp(b, c, h + 2 * ph, w + 2 * pw);
  const std::size_t wp = w + 2 * pw;
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* src = x.plane(bi, ci);
      double* dst = xp.plane(bi, ci) + ph * wp + pw;
      for (std::size_t y = 0; y < h; ++y) {
        std::memcpy(dst + y * wp, src + y * w, w * sizeof(double));
      }
    }
  }
  return xp;
}

/// dot() law with a stride on the second operand (general-stride fallback).
double strided_dot(const double* a, const double* b, std::size_t b_step,
                   std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[i % 4] += a[i] * b[i * b_step];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& w,
                       std::span<const double> bias, const ConvGeom& geom) {
  const auto [b, c, h, wdt] = x.dims;
  const auto [n, wc, kh, kw] = w.dims;
  if (c != wc) {
    throw ValidationError("conv: input has " + std::to_string(c) +
                          " channels, filters expect " + std::to_string(wc));
  }
  if (!bias.empty() && bias.size() != n) {
    throw ValidationError("conv: bias size " + std::to_string(bias.size()) +
                          " does not match " + std::to_string(n) + " filters");
  }
  const std::size_t oh = conv_out_extent(h, kh, geom.stride_h, geom.pad_h, "y");
  const std::size_t ow = conv_out_extent(wdt, kw, geom.stride_w, geom.pad_w, "x");

  const Tensor4 xp = pad_input(x, geom.pad_h, geom.pad_w);
  const std::size_t wp = xp.dims[3];

  Tensor4 out(b, n, oh, ow);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t oc = 0; oc < n; ++oc) {
      double* op = out.plane(bi, oc);
      if (!bias.empty()) std::fill(op, op + oh * ow, bias[oc]);
      for (std::size_t ic = 0; ic < c; ++ic) {
        const double* ip = xp.plane(bi, ic);
        for (std::size_t r = 0; r < kh; ++r) {
          for (std::size_t s = 0; s < kw; ++s) {
            const double wv = w.at(oc, ic, r, s);
            const double* base = ip + r * wp + s;
            if (geom.stride_w == 1) {
              kernels::madd_rows(op, ow, base, geom.stride_h * wp, wv, oh, ow);
            } else {
              for (std::size_t oy = 0; oy < oh; ++oy) {
                double* orow = op + oy * ow;
                const double* irow = base + oy * geom.stride_h * wp;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  orow[ox] += wv * irow[ox * geom.stride_w];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor4& grad_out, const Tensor4& x,
                          const Tensor4& w, const ConvGeom& geom) {
  const auto [b, c, h, wdt] = x.dims;
  const auto [n, wc, kh, kw] = w.dims;
  if (c != wc) throw ValidationError("conv backward: channel mismatch");
  const std::size_t oh = conv_out_extent(h, kh, geom.stride_h, geom.pad_h, "y");
  const std::size_t ow = conv_out_extent(wdt, kw, geom.stride_w, geom.pad_w, "x");
  if (grad_out.dims != std::array<std::size_t, 4>{b, n, oh, ow}) {
    throw ValidationError("conv backward: grad_out shape does not match output");
  }

  ConvGrads g;
  g.bias.assign(n, 0.0);
  for (std::size_t oc = 0; oc < n; ++oc) {
    double acc = 0.0;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const double* gp = grad_out.plane(bi, oc);
      for (std::size_t i = 0; i < oh * ow; ++i) acc += gp[i];
    }
    g.bias[oc] = acc;
  }

  const Tensor4 xp = pad_input(x, geom.pad_h, geom.pad_w);
  const std::size_t wp = xp.dims[3];

  // dL/dw[oc][ic][r][s] = sum over batch of <grad_out plane, shifted input>,
  // batch sub-totals folded in batch order.
  g.weights = Tensor4(n, c, kh, kw);
  for (std::size_t oc = 0; oc < n; ++oc) {
    for (std::size_t ic = 0; ic < c; ++ic) {
      for (std::size_t r = 0; r < kh; ++r) {
        for (std::size_t s = 0; s < kw; ++s) {
          double total = 0.0;
          for (std::size_t bi = 0; bi < b; ++bi) {
            const double* gp = grad_out.plane(bi, oc);
            const double* base = xp.plane(bi, ic) + r * wp + s;
            if (geom.stride_w == 1) {
              total += kernels::dot_rows(gp, ow, base, geom.stride_h * wp, oh, ow);
            } else {
              for (std::size_t oy = 0; oy < oh; ++oy) {
                total += strided_dot(gp + oy * ow, base + oy * geom.stride_h * wp,
                                     geom.stride_w, ow);
              }
            }
          }
          g.weights.at(oc, ic, r, s) = total;
        }
      }
    }
  }

  g.input = Tensor4(b, c, h, wdt);
  const bool unit_stride = geom.stride_h == 1 && geom.stride_w == 1;
  if (unit_stride && geom.pad_h + 1 <= kh && geom.pad_w + 1 <= kw) {
    // Full correlation with the flipped filter, expressed as madd over a
    // zero-bordered grad_out so every row is contiguous.
    const std::size_t gh = h + kh - 1, gw = wdt + kw - 1;
    const std::size_t oy0 = kh - 1 - geom.pad_h, ox0 = kw - 1 - geom.pad_w;
    Tensor4 gpad(b, n, gh, gw);
    for (std::size_t bi = 0; bi < b; ++bi) {
      for (std::size_t oc = 0; oc < n; ++oc) {
        const double* src = grad_out.plane(bi, oc);
        double* dst = gpad.plane(bi, oc) + oy0 * gw + ox0;
        for (std::size_t y = 0; y < oh; ++y) {
          std::memcpy(dst + y * gw, src + y * ow, ow * sizeof(double));
        }
      }
    }
    for (std::size_t bi = 0; bi < b; ++bi) {
      for (std::size_t ic = 0; ic < c; ++ic) {
        double* gip = g.input.plane(bi, ic);
        for (std::size_t oc = 0; oc < n; ++oc) {
          const double* gp = gpad.plane(bi, oc);
          for (std::size_t r = 0; r < kh; ++r) {
            for (std::size_t s = 0; s < kw; ++s) {
              const double wv = w.at(oc, ic, r, s);
              const double* base = gp + (kh - 1 - r) * gw + (kw - 1 - s);
              kernels::madd_rows(gip, wdt, base, gw, wv, h, wdt);
            }
          }
        }
      }
    }
  } else {
    for (std::size_t bi = 0; bi < b; ++bi) {
      for (std::size_t oc = 0; oc < n; ++oc) {
        const double* gp = grad_out.plane(bi, oc);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double gv = gp[oy * ow + ox];
            for (std::size_t ic = 0; ic < c; ++ic) {
              for (std::size_t r = 0; r < kh; ++r) {
                const std::size_t iy = oy * geom.stride_h + r;
                if (iy < geom.pad_h || iy >= h + geom.pad_h) continue;
                for (std::size_t s = 0; s < kw; ++s) {
                  const std::size_t ix = ox * geom.stride_w + s;
                  if (ix < geom.pad_w || ix >= wdt + geom.pad_w) continue;
                  g.input.at(bi, ic, iy - geom.pad_h, ix - geom.pad_w) +=
                      w.at(oc, ic, r, s) * gv;
                }
              }
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

SoftmaxResult softmax_cross_entropy(const Matrix& logits,
                                    std::span<const int> labels) {
  const std::size_t b = logits.rows, k = logits.cols;
  if (labels.size() != b) {
    throw ValidationError("loss: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(b) + " rows");
  }
  SoftmaxResult res{0.0, Matrix(b, k)};
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ValidationError("loss: label " + std::to_string(y) +
                            " out of range [0, " + std::to_string(k) + ")");
    }
    const double* row = logits.row(i);
    double* grow = res.grad_logits.row(i);
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    res.loss += (m + std::log(z) - row[y]) * inv_b;
    for (std::size_t j = 0; j < k; ++j) {
      grow[j] = std::exp(row[j] - m) / z * inv_b;
    }
    grow[y] -= inv_b;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Spec validation
// ---------------------------------------------------------------------------

void validate(const ModelSpec& spec) {
  if (spec.in_ch == 0 || spec.in_h == 0 || spec.in_w == 0) {
    throw ValidationError("model spec: input shape has a zero dimension");
  }
  if (spec.num_classes == 0) throw ValidationError("model spec: num_classes is 0");
  if (spec.layers.empty()) throw ValidationError("model spec: no layers");

  std::size_t c = spec.in_ch, h = spec.in_h, w = spec.in_w;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string at = "model spec: layer " + std::to_string(i);
    const LayerSpec& l = spec.layers[i];
    if (const auto* cv = std::get_if<ConvLayerSpec>(&l)) {
      if (cv->out_ch == 0 || cv->in_ch == 0 || cv->kh == 0 || cv->kw == 0) {
        throw ValidationError(at + ": conv with a zero dimension");
      }
      if (cv->geom.stride_h == 0 || cv->geom.stride_w == 0) {
        throw ValidationError(at + ": conv stride is 0");
      }
      if (cv->in_ch != c) {
        throw ValidationError(at + ": conv expects " + std::to_string(cv->in_ch) +
                              " channels, gets " + std::to_string(c));
      }
      if (h + 2 * cv->geom.pad_h < cv->kh || w + 2 * cv->geom.pad_w < cv->kw) {
        throw ValidationError(at + ": conv kernel larger than padded input");
      }
      c = cv->out_ch;
      h = (h + 2 * cv->geom.pad_h - cv->kh) / cv->geom.stride_h + 1;
      w = (w + 2 * cv->geom.pad_w - cv->kw) / cv->geom.stride_w + 1;
    } else if (const auto* ln = std::get_if<LinearLayerSpec>(&l)) {
      if (ln->out == 0 || ln->in == 0) {
        throw ValidationError(at + ": linear with a zero dimension");
      }
      if (h != 1 || w != 1) {
        throw ValidationError(at + ": linear needs flattened input, got " +
                              std::to_string(c) + "x" + std::to_string(h) + "x" +
                              std::to_string(w));
      }
      if (ln->in != c) {
        throw ValidationError(at + ": linear expects " + std::to_string(ln->in) +
                              " features, gets " + std::to_string(c));
      }
      c = ln->out;
    } else if (std::holds_alternative<MaxPoolLayerSpec>(l)) {
      if (h < 2 || w < 2) {
        throw ValidationError(at + ": pool needs spatial extent >= 2, got " +
                              std::to_string(h) + "x" + std::to_string(w));
      }
      h /= 2;
      w /= 2;
    } else if (std::holds_alternative<FlattenLayerSpec>(l)) {
      c = c * h * w;
      h = 1;
      w = 1;
    }
    // ReLU keeps the shape.
  }
  if (!std::holds_alternative<LinearLayerSpec>(spec.layers.back())) {
    throw ValidationError("model spec: last layer must be linear");
  }
  if (h != 1 || w != 1 || c != spec.num_classes) {
    throw ValidationError("model spec: final output has " + std::to_string(c) +
                          " features, expected " +
                          std::to_string(spec.num_classes) + " classes");
  }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Conv2d::Conv2d(const ConvLayerSpec& spec)
    : w(spec.out_ch, spec.in_ch, spec.kh, spec.kw),
      bias(spec.out_ch, 0.0),
      grad_w(spec.out_ch, spec.in_ch, spec.kh, spec.kw),
      grad_bias(spec.out_ch, 0.0),
      geom_(spec.geom) {}

Tensor4 Conv2d::forward(const Tensor4& x, bool cache) {
  if (cache) cached_x_ = x;
  return conv2d_forward(x, w, bias, geom_);
}

Tensor4 Conv2d::backward(const Tensor4& grad_out) {
  if (cached_x_.size() == 0) {
    throw ValidationError("conv backward without a cached forward pass");
  }
  ConvGrads g = conv2d_backward(grad_out, cached_x_, w, geom_);
  grad_w = std::move(g.weights);
  grad_bias = std::move(g.bias);
  return std::move(g.input);
}

void Conv2d::collect_params(std::size_t layer_index, std::vector<ParamRef>& out) {
  const std::string base = "layer" + std::to_string(layer_index);
  out.push_back({base + ".weight", &w.data, &grad_w.data});
  out.push_back({base + ".bias", &bias, &grad_bias});
}

std::unique_ptr<Layer> Conv2d::clone() const {
  return std::make_unique<Conv2d>(*this);
}

Linear::Linear(const LinearLayerSpec& spec)
    : w(spec.out, spec.in),
      bias(spec.out, 0.0),
      grad_w(spec.out, spec.in),
      grad_bias(spec.out, 0.0) {}

Tensor4 Linear::forward(const Tensor4& x, bool cache) {
  const auto [b, f, h, wd] = x.dims;
  if (h != 1 || wd != 1 || f != w.cols) {
    throw ValidationError("linear: input shape does not match weight");
  }
  if (cache) cached_x_ = x;
  Tensor4 out(b, w.rows, 1, 1);
  for (std::size_t bi = 0; bi < b; ++bi) {
    const double* xin = x.plane(bi, 0);
    double* yout = out.plane(bi, 0);
    for (std::size_t o = 0; o < w.rows; ++o) {
      yout[o] = kernels::dot(w.row(o), xin, w.cols) + bias[o];
    }
  }
  return out;
}

Tensor4 Linear::backward(const Tensor4& grad_out) {
  if (cached_x_.size() == 0) {
    throw ValidationError("linear backward without a cached forward pass");
  }
  const auto [b, f, h, wd] = cached_x_.dims;
  (void)h;
  (void)wd;
  if (grad_out.dims != std::array<std::size_t, 4>{b, w.rows, 1, 1}) {
    throw ValidationError("linear backward: grad_out shape mismatch");
  }
  std::fill(grad_w.data.begin(), grad_w.data.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  Tensor4 gin(b, f, 1, 1);
  for (std::size_t bi = 0; bi < b; ++bi) {
    const double* xin = cached_x_.plane(bi, 0);
    const double* g = grad_out.plane(bi, 0);
    double* gi = gin.plane(bi, 0);
    for (std::size_t o = 0; o < w.rows; ++o) {
      kernels::madd(grad_w.row(o), xin, g[o], w.cols);
      grad_bias[o] += g[o];
      kernels::madd(gi, w.row(o), g[o], w.cols);
    }
  }
  return gin;
}

void Linear::collect_params(std::size_t layer_index, std::vector<ParamRef>& out) {
  const std::string base = "layer" + std::to_string(layer_index);
  out.push_back({base + ".weight", &w.data, &grad_w.data});
  out.push_back({base + ".bias", &bias, &grad_bias});
}

std::unique_ptr<Layer> Linear::clone() const {
  return std::make_unique<Linear>(*this);
}

Tensor4 ReLU::forward(const Tensor4& x, bool cache) {
  if (cache) cached_x_ = x;
  Tensor4 out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor4 ReLU::backward(const Tensor4& grad_out) {
  if (cached_x_.size() == 0) {
    throw ValidationError("relu backward without a cached forward pass");
  }
  if (!grad_out.same_shape(cached_x_)) {
    throw ValidationError("relu backward: grad_out shape mismatch");
  }
  Tensor4 gin = grad_out;
  for (std::size_t i = 0; i < gin.size(); ++i) {
    if (!(cached_x_.data[i] > 0.0)) gin.data[i] = 0.0;
  }
  return gin;
}

std::unique_ptr<Layer> ReLU::clone() const {
  return std::make_unique<ReLU>(*this);
}

Tensor4 MaxPool2x2::forward(const Tensor4& x, bool cache) {
  const auto [b, c, h, w] = x.dims;
  if (h < 2 || w < 2) throw ValidationError("pool: input smaller than window");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor4 out(b, c, oh, ow);
  if (cache) {
    in_dims_ = x.dims;
    argmax_.assign(out.size(), 0);
  }
  std::size_t k = 0;
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* ip = x.plane(bi, ci);
      const std::size_t plane_base = (bi * c + ci) * h * w;
      double* op = out.plane(bi, ci);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t best = 2 * oy * w + 2 * ox;
          double bv = ip[best];
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (2 * oy + dy) * w + (2 * ox + dx);
              if (ip[idx] > bv) {  // strict: ties keep the first seen
                bv = ip[idx];
                best = idx;
              }
            }
          }
          op[oy * ow + ox] = bv;
          if (cache) argmax_[k] = plane_base + best;
          ++k;
        }
      }
    }
  }
  return out;
}

Tensor4 MaxPool2x2::backward(const Tensor4& grad_out) {
  if (argmax_.empty()) {
    throw ValidationError("pool backward without a cached forward pass");
  }
  if (grad_out.size() != argmax_.size()) {
    throw ValidationError("pool backward: grad_out shape mismatch");
  }
  Tensor4 gin(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
  for (std::size_t i = 0; i < argmax_.size(); ++i) {
    gin.data[argmax_[i]] += grad_out.data[i];
  }
  return gin;
}

std::unique_ptr<Layer> MaxPool2x2::clone() const {
  return std::make_unique<MaxPool2x2>(*this);
}

Tensor4 Flatten::forward(const Tensor4& x, bool cache) {
  if (cache) in_dims_ = x.dims;
  Tensor4 out(x.dims[0], x.dims[1] * x.dims[2] * x.dims[3], 1, 1);
  out.data = x.data;
  return out;
}

Tensor4 Flatten::backward(const Tensor4& grad_out) {
  if (in_dims_[0] == 0) {
    throw ValidationError("flatten backward without a cached forward pass");
  }
  Tensor4 gin(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3]);
  if (grad_out.size() != gin.size()) {
    throw ValidationError("flatten backward: grad_out shape mismatch");
  }
  gin.data = grad_out.data;
  return gin;
}

std::unique_ptr<Layer> Flatten::clone() const {
  return std::make_unique<Flatten>(*this);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  if (const auto* cv = std::get_if<ConvLayerSpec>(&spec)) {
    return std::make_unique<Conv2d>(*cv);
  }
  if (const auto* ln = std::get_if<LinearLayerSpec>(&spec)) {
    return std::make_unique<Linear>(*ln);
  }
  if (std::holds_alternative<ReluLayerSpec>(spec)) return std::make_unique<ReLU>();
  if (std::holds_alternative<MaxPoolLayerSpec>(spec)) {
    return std::make_unique<MaxPool2x2>();
  }
  return std::make_unique<Flatten>();
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  layers_.reserve(spec_.layers.size());
  for (const LayerSpec& l : spec_.layers) layers_.push_back(make_layer(l));
}

Model::Model(ModelSpec spec, Rng& rng) : Model(std::move(spec)) {
  for (auto& l : layers_) {
    if (auto* cv = dynamic_cast<Conv2d*>(l.get())) {
      const std::size_t fan_in = cv->w.dims[1] * cv->w.dims[2] * cv->w.dims[3];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& v : cv->w.data) v = rng.uniform(-bound, bound);
    } else if (auto* ln = dynamic_cast<Linear*>(l.get())) {
      const double bound = std::sqrt(6.0 / static_cast<double>(ln->w.cols));
      for (double& v : ln->w.data) v = rng.uniform(-bound, bound);
    }
  }
}

Model::Model(const Model& o) : spec_(o.spec_) {
  layers_.reserve(o.layers_.size());
  for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& o) {
  if (this != &o) {
    Model tmp(o);
    *this = std::move(tmp);
  }
  return *this;
}

Tensor4 Model::forward(const Tensor4& x, bool cache) {
  if (x.dims[1] != spec_.in_ch || x.dims[2] != spec_.in_h ||
      x.dims[3] != spec_.in_w) {
    throw ValidationError("model: input shape does not match spec");
  }
  Tensor4 cur = x;
  for (auto& l : layers_) cur = l->forward(cur, cache);
  return cur;
}

void Model::backward(const Tensor4& grad_logits) {
  Tensor4 cur = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    cur = layers_[i]->backward(cur);
  }
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(i, out);
  }
  return out;
}

Matrix logits_as_matrix(const Tensor4& t) {
  if (t.dims[2] != 1 || t.dims[3] != 1) {
    throw ValidationError("logits tensor is not flat");
  }
  Matrix m(t.dims[0], t.dims[1]);
  m.data = t.data;
  return m;
}

double top1_accuracy(Model& model, const Tensor4& images,
                     std::span<const int> labels, std::size_t batch_size) {
  const std::size_t count = images.dims[0];
  if (labels.size() != count) {
    throw ValidationError("accuracy: label count does not match image count");
  }
  if (count == 0) throw ValidationError("accuracy: empty dataset");
  const std::size_t c = images.dims[1], h = images.dims[2], w = images.dims[3];
  const std::size_t plane = c * h * w;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t bs = std::min(batch_size, count - start);
    Tensor4 batch(bs, c, h, w);
    std::memcpy(batch.data.data(), images.data.data() + start * plane,
                bs * plane * sizeof(double));
    const Tensor4 logits = model.forward(batch, /*cache=*/false);
    const std::size_t k = logits.dims[1];
    for (std::size_t i = 0; i < bs; ++i) {
      const double* row = logits.plane(i, 0);
      std::size_t arg = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (row[j] > row[arg]) arg = j;
      }
      if (static_cast<int>(arg) == labels[start + i]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void SgdState::init(const std::vector<ParamRef>& params) {
  velocity.clear();
  velocity.reserve(params.size());
  for (const ParamRef& p : params) velocity.emplace_back(p.value->size(), 0.0);
}

void SgdState::step(const std::vector<ParamRef>& params) {
  if (velocity.size() != params.size()) {
    throw ValidationError("sgd: state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    if (velocity[i].size() != p.value->size()) {
      throw ValidationError("sgd: velocity size mismatch for " + p.name);
    }
    kernels::sgd_update(p.value->data(), velocity[i].data(), p.grad->data(),
                        p.value->size(), lr, momentum, weight_decay);
  }
}

}  // namespace trp
