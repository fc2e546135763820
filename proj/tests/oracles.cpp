#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "trp/rng.hpp"

namespace trp::oracles {

std::vector<double> symmetric_eigenvalues(Matrix a) {
  if (a.rows != a.cols) throw std::invalid_argument("not square");
  const std::size_t n = a.rows;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(a(i, i));
    if (std::sqrt(off) <= 1e-14 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double app = a(p, p), aqq = a(q, q);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        a(p, q) = a(q, p) = 0.0;
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

std::vector<double> singular_values_via_gram(const Matrix& a) {
  const bool use_ata = a.cols <= a.rows;
  const std::size_t n = use_ata ? a.cols : a.rows;
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      if (use_ata) {
        for (std::size_t k = 0; k < a.rows; ++k) acc += a(k, i) * a(k, j);
      } else {
        for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * a(j, k);
      }
      gram(i, j) = acc;
    }
  }
  std::vector<double> eig = symmetric_eigenvalues(std::move(gram));
  for (double& v : eig) v = std::sqrt(std::max(v, 0.0));
  return eig;
}

std::size_t truncation_rank_enumerated(std::span<const double> sigma,
                                       double e) {
  double total = 0.0;
  for (double s : sigma) total += s * s;
  for (std::size_t k = 0; k <= sigma.size(); ++k) {
    double tail = 0.0;
    for (std::size_t j = k; j < sigma.size(); ++j) tail += sigma[j] * sigma[j];
    if (tail <= e * total) return k;
  }
  return sigma.size();
}

Tensor4 naive_conv_forward(const Tensor4& x, const Tensor4& w,
                           std::span<const double> bias, const ConvGeom& geom) {
  const auto [b, c, h, wd] = x.dims;
  const auto [n, wc, kh, kw] = w.dims;
  if (c != wc) throw std::invalid_argument("channel mismatch");
  const std::size_t oh = (h + 2 * geom.pad_h - kh) / geom.stride_h + 1;
  const std::size_t ow = (wd + 2 * geom.pad_w - kw) / geom.stride_w + 1;
  Tensor4 out(b, n, oh, ow);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t oc = 0; oc < n; ++oc) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t r = 0; r < kh; ++r) {
              for (std::size_t s = 0; s < kw; ++s) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * geom.stride_h + r) -
                    static_cast<std::ptrdiff_t>(geom.pad_h);
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * geom.stride_w + s) -
                    static_cast<std::ptrdiff_t>(geom.pad_w);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                    ix >= static_cast<std::ptrdiff_t>(wd)) {
                  continue;
                }
                acc += w.at(oc, ic, r, s) * x.at(bi, ic, iy, ix);
              }
            }
          }
          out.at(bi, oc, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

std::vector<double> fd_gradient(std::vector<double>& x,
                                const std::function<double()>& loss, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss();
    x[i] = keep - h;
    const double down = loss();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_rel_err(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, rel_err(a[i], b[i]));
  }
  return worst;
}

void reference_sgd_update(std::vector<double>& w, std::vector<double>& v,
                          const std::vector<double>& g, double lr,
                          double momentum, double weight_decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double step = g[i] + weight_decay * w[i];
    v[i] = momentum * v[i] + step;
    w[i] = w[i] - lr * v[i];
  }
}

Model reference_sgd_train(const ModelSpec& spec, const Dataset& data,
                          const TrpConfig& cfg) {
  Rng init_rng(cfg.seed);
  Model model(spec, init_rng);
  Rng shuffle_rng(cfg.seed + 1);

  auto params = model.params();
  std::vector<std::vector<double>> velocity;
  for (const ParamRef& p : params) velocity.emplace_back(p.value->size(), 0.0);

  const std::size_t n = data.train.count();
  const auto [cnt, c, h, w] = data.train.images.dims;
  (void)cnt;
  const std::size_t plane = c * h * w;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_for_epoch(cfg, epoch);
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n - start);
      Tensor4 inputs(bs, c, h, w);
      std::vector<int> labels(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        std::memcpy(inputs.data.data() + i * plane,
                    data.train.images.data.data() + order[start + i] * plane,
                    plane * sizeof(double));
        labels[i] = data.train.labels[order[start + i]];
      }
      const Tensor4 logits = model.forward(inputs, /*cache=*/true);
      const SoftmaxResult sm =
          softmax_cross_entropy(logits_as_matrix(logits), labels);
      Tensor4 grad(logits.dims[0], logits.dims[1], 1, 1);
      grad.data = sm.grad_logits.data;
      model.backward(grad);
      auto refs = model.params();
      for (std::size_t i = 0; i < refs.size(); ++i) {
        reference_sgd_update(*refs[i].value, velocity[i], *refs[i].grad, lr,
                             cfg.momentum, cfg.weight_decay);
      }
    }
  }
  return model;
}

Matrix rank1_truncation_2x2(const Matrix& a) {
  if (a.rows != 2 || a.cols != 2) throw std::invalid_argument("not 2x2");
  // Eigenvector of AᵀA for the larger eigenvalue gives v1; then sigma1*u1*v1ᵀ
  // = A*v1*v1ᵀ.
  const double g00 = a(0, 0) * a(0, 0) + a(1, 0) * a(1, 0);
  const double g01 = a(0, 0) * a(0, 1) + a(1, 0) * a(1, 1);
  const double g11 = a(0, 1) * a(0, 1) + a(1, 1) * a(1, 1);
  const double tr = g00 + g11;
  const double det = g00 * g11 - g01 * g01;
  const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
  const double lam = (tr + disc) / 2.0;
  double v0, v1;
  if (std::abs(g01) > 1e-300) {
    v0 = lam - g11;
    v1 = g01;
  } else if (g00 >= g11) {
    v0 = 1.0;
    v1 = 0.0;
  } else {
    v0 = 0.0;
    v1 = 1.0;
  }
  const double norm = std::hypot(v0, v1);
  v0 /= norm;
  v1 /= norm;
  // A*v1 (the column Av), then outer product with v.
  const double av0 = a(0, 0) * v0 + a(0, 1) * v1;
  const double av1 = a(1, 0) * v0 + a(1, 1) * v1;
  Matrix out(2, 2);
  out(0, 0) = av0 * v0;
  out(0, 1) = av0 * v1;
  out(1, 0) = av1 * v0;
  out(1, 1) = av1 * v1;
  return out;
}

double linear_probe_accuracy(const Split& split, std::size_t classes,
                             std::size_t steps, double lr) {
  const std::size_t n = split.count();
  const std::size_t dim =
      split.images.dims[1] * split.images.dims[2] * split.images.dims[3];
  std::vector<double> w(classes * dim, 0.0), b(classes, 0.0);
  std::vector<double> logits(classes), p(classes);

  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<double> gw(classes * dim, 0.0), gb(classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = split.images.data.data() + i * dim;
      double m = -1e300;
      for (std::size_t k = 0; k < classes; ++k) {
        double acc = b[k];
        for (std::size_t d = 0; d < dim; ++d) acc += w[k * dim + d] * x[d];
        logits[k] = acc;
        m = std::max(m, acc);
      }
      double z = 0.0;
      for (std::size_t k = 0; k < classes; ++k) z += std::exp(logits[k] - m);
      for (std::size_t k = 0; k < classes; ++k) {
        p[k] = std::exp(logits[k] - m) / z;
        const double g =
            (p[k] - (static_cast<int>(k) == split.labels[i] ? 1.0 : 0.0)) /
            static_cast<double>(n);
        gb[k] += g;
        for (std::size_t d = 0; d < dim; ++d) gw[k * dim + d] += g * x[d];
      }
    }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * gw[j];
    for (std::size_t k = 0; k < classes; ++k) b[k] -= lr * gb[k];
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = split.images.data.data() + i * dim;
    std::size_t arg = 0;
    double best = -1e300;
    for (std::size_t k = 0; k < classes; ++k) {
      double acc = b[k];
      for (std::size_t d = 0; d < dim; ++d) acc += w[k * dim + d] * x[d];
      if (acc > best) {
        best = acc;
        arg = k;
      }
    }
    if (static_cast<int>(arg) == split.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace trp::oracles
