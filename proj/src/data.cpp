#include "trp/data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "trp/common.hpp"
#include "trp/rng.hpp"

namespace trp {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& b, std::size_t off,
                          const std::string& path) {
  if (off + 4 > b.size()) {
    throw IoError(path + ": truncated at offset " + std::to_string(b.size()) +
                  " (need 4 bytes at offset " + std::to_string(off) + ")");
  }
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

struct IdxImages {
  std::size_t count = 0, h = 0, w = 0;
  const std::uint8_t* pixels = nullptr;
};

IdxImages parse_idx_images(const std::vector<std::uint8_t>& b,
                           const std::string& path) {
  const std::uint32_t magic = read_u32_be(b, 0, path);
  if (magic != 0x803u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    throw IoError(path + ": bad IDX image magic " + buf + " at offset 0");
  }
  IdxImages out;
  out.count = read_u32_be(b, 4, path);
  out.h = read_u32_be(b, 8, path);
  out.w = read_u32_be(b, 12, path);
  const std::size_t need = 16 + out.count * out.h * out.w;
  if (b.size() < need) {
    throw IoError(path + ": truncated at offset " + std::to_string(b.size()) +
                  " (need " + std::to_string(need) + " bytes)");
  }
  out.pixels = b.data() + 16;
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& b,
                                           const std::string& path) {
  const std::uint32_t magic = read_u32_be(b, 0, path);
  if (magic != 0x801u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    throw IoError(path + ": bad IDX label magic " + buf + " at offset 0");
  }
  const std::size_t count = read_u32_be(b, 4, path);
  if (b.size() < 8 + count) {
    throw IoError(path + ": truncated at offset " + std::to_string(b.size()) +
                  " (need " + std::to_string(8 + count) + " bytes)");
  }
  return std::vector<std::uint8_t>(b.begin() + 8, b.begin() + 8 + count);
}

Split make_split(const std::uint8_t* pixels,
                 const std::vector<std::uint8_t>& labels, std::size_t count,
                 std::size_t channels, std::size_t h, std::size_t w,
                 const std::vector<double>& mean,
                 const std::vector<double>& stddev, std::size_t num_classes,
                 const std::string& what) {
  Split s;
  s.images = Tensor4(count, channels, h, w);
  const std::size_t plane = h * w;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* src = pixels + (i * channels + c) * plane;
      double* dst = s.images.plane(i, c);
      for (std::size_t p = 0; p < plane; ++p) {
        dst[p] = (src[p] / 255.0 - mean[c]) / stddev[c];
      }
    }
  }
  s.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[i] >= num_classes) {
      throw ValidationError(what + ": label " + std::to_string(labels[i]) +
                            " out of range at index " + std::to_string(i));
    }
    s.labels[i] = static_cast<int>(labels[i]);
  }
  return s;
}

Split load_mnist_split(const std::string& images_path,
                       const std::string& labels_path, std::size_t limit,
                       const std::vector<double>& mean,
                       const std::vector<double>& stddev) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);
  const IdxImages imgs = parse_idx_images(image_bytes, images_path);
  const auto labels = parse_idx_labels(label_bytes, labels_path);
  if (labels.size() != imgs.count) {
    throw ValidationError(images_path + ": " + std::to_string(imgs.count) +
                          " images but " + std::to_string(labels.size()) +
                          " labels");
  }
  std::size_t count = imgs.count;
  if (limit > 0 && limit < count) count = limit;
  if (count == 0) throw ValidationError(images_path + ": empty split");
  std::vector<std::uint8_t> kept(labels.begin(), labels.begin() + count);
  return make_split(imgs.pixels, kept, count, 1, imgs.h, imgs.w, mean, stddev,
                    10, "mnist");
}

}  // namespace

Dataset load_mnist_idx(const std::string& dir, std::size_t train_limit,
                       std::size_t test_limit) {
  Dataset d;
  d.num_classes = 10;
  d.mean = {0.1307};
  d.stddev = {0.3081};
  d.train = load_mnist_split(dir + "/train-images-idx3-ubyte",
                             dir + "/train-labels-idx1-ubyte", train_limit,
                             d.mean, d.stddev);
  d.test = load_mnist_split(dir + "/t10k-images-idx3-ubyte",
                            dir + "/t10k-labels-idx1-ubyte", test_limit,
                            d.mean, d.stddev);
  return d;
}

// ---------------------------------------------------------------------------
// CIFAR-10
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kCifarRecord = 3073;  // label byte + 3 * 32 * 32

void append_cifar_file(const std::string& path,
                       std::vector<std::uint8_t>& pixels,
                       std::vector<std::uint8_t>& labels) {
  const auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw IoError(path + ": size " + std::to_string(bytes.size()) +
                  " is not a multiple of " + std::to_string(kCifarRecord));
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecord;
    labels.push_back(rec[0]);
    pixels.insert(pixels.end(), rec + 1, rec + kCifarRecord);
  }
}

Split subset_per_class(const std::vector<std::uint8_t>& pixels,
                       const std::vector<std::uint8_t>& labels,
                       std::size_t per_class, const std::vector<double>& mean,
                       const std::vector<double>& stddev) {
  std::array<std::size_t, 10> seen{};
  std::vector<std::uint8_t> kept_pixels;
  std::vector<std::uint8_t> kept_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 10) {
      throw ValidationError("cifar10: label " + std::to_string(labels[i]) +
                            " out of range at record " + std::to_string(i));
    }
    if (per_class > 0 && seen[labels[i]] >= per_class) continue;
    ++seen[labels[i]];
    kept_labels.push_back(labels[i]);
    const std::uint8_t* rec = pixels.data() + i * 3072;
    kept_pixels.insert(kept_pixels.end(), rec, rec + 3072);
  }
  if (kept_labels.empty()) throw ValidationError("cifar10: empty split");
  return make_split(kept_pixels.data(), kept_labels, kept_labels.size(), 3, 32,
                    32, mean, stddev, 10, "cifar10");
}

}  // namespace

Dataset load_cifar10_binary(const std::string& dir,
                            std::size_t train_per_class,
                            std::size_t test_per_class) {
  Dataset d;
  d.num_classes = 10;
  d.mean = {0.4914, 0.4822, 0.4465};
  d.stddev = {0.2470, 0.2435, 0.2616};

  std::vector<std::uint8_t> pixels, labels;
  for (int i = 1; i <= 5; ++i) {
    const std::string path = dir + "/data_batch_" + std::to_string(i) + ".bin";
    if (std::filesystem::exists(path)) append_cifar_file(path, pixels, labels);
  }
  if (labels.empty()) {
    throw IoError(dir + ": no data_batch_*.bin files found");
  }
  d.train = subset_per_class(pixels, labels, train_per_class, d.mean, d.stddev);

  pixels.clear();
  labels.clear();
  append_cifar_file(dir + "/test_batch.bin", pixels, labels);
  d.test = subset_per_class(pixels, labels, test_per_class, d.mean, d.stddev);
  return d;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

Dataset synthetic_blobs(std::uint64_t seed, std::size_t n_per_class,
                        std::size_t classes, std::size_t image_size,
                        std::size_t channels) {
  if (classes == 0 || n_per_class == 0 || image_size == 0 || channels == 0) {
    throw ValidationError("blobs: zero-sized request");
  }
  Rng rng(seed);
  const std::size_t dim = channels * image_size * image_size;
  std::vector<std::vector<double>> templates(classes);
  for (auto& t : templates) {
    t.resize(dim);
    for (double& v : t) v = rng.normal();
  }

  const std::size_t test_per_class = std::max<std::size_t>(1, n_per_class / 5);
  auto fill = [&](Split& split, std::size_t per_class) {
    const std::size_t total = per_class * classes;
    split.images = Tensor4(total, channels, image_size, image_size);
    split.labels.resize(total);
    std::size_t idx = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i, ++idx) {
        double* dst = split.images.data.data() + idx * dim;
        for (std::size_t p = 0; p < dim; ++p) {
          dst[p] = templates[c][p] + 0.3 * rng.normal();
        }
        split.labels[idx] = static_cast<int>(c);
      }
    }
  };

  Dataset d;
  d.num_classes = classes;
  d.mean.assign(channels, 0.0);
  d.stddev.assign(channels, 1.0);
  fill(d.train, n_per_class);
  fill(d.test, test_per_class);
  return d;
}

namespace {

// Seven-segment style digit rendering on a 7x7 cell grid.
enum : unsigned {
  kTop = 1u << 0,
  kUpperLeft = 1u << 1,
  kUpperRight = 1u << 2,
  kMid = 1u << 3,
  kLowerLeft = 1u << 4,
  kLowerRight = 1u << 5,
  kBottom = 1u << 6,
};

constexpr unsigned kDigitSegments[10] = {
    kTop | kUpperLeft | kUpperRight | kLowerLeft | kLowerRight | kBottom,  // 0
    kUpperRight | kLowerRight,                                             // 1
    kTop | kUpperRight | kMid | kLowerLeft | kBottom,                      // 2
    kTop | kUpperRight | kMid | kLowerRight | kBottom,                     // 3
    kUpperLeft | kUpperRight | kMid | kLowerRight,                         // 4
    kTop | kUpperLeft | kMid | kLowerRight | kBottom,                      // 5
    kTop | kUpperLeft | kMid | kLowerLeft | kLowerRight | kBottom,         // 6
    kTop | kUpperRight | kLowerRight,                                      // 7
    kTop | kUpperLeft | kUpperRight | kMid | kLowerLeft | kLowerRight |
        kBottom,                                                           // 8
    kTop | kUpperLeft | kUpperRight | kMid | kLowerRight | kBottom,        // 9
};

bool glyph_cell(unsigned seg, std::size_t row, std::size_t col) {
  if (row == 0 && col >= 1 && col <= 5) return seg & kTop;
  if (row == 3 && col >= 1 && col <= 5) return seg & kMid;
  if (row == 6 && col >= 1 && col <= 5) return seg & kBottom;
  if (col == 0 && row <= 3) return seg & kUpperLeft;
  if (col == 6 && row <= 3) return seg & kUpperRight;
  if (col == 0 && row >= 3) return seg & kLowerLeft;
  if (col == 6 && row >= 3) return seg & kLowerRight;
  return false;
}

struct GlyphCorpus {
  std::vector<std::uint8_t> pixels;  // count * 28 * 28
  std::vector<std::uint8_t> labels;
};

/// Renders `count` jittered digit images: random shift, per-image intensity,
/// uniform pixel noise. Classes cycle 0..9 so every prefix is balanced.
GlyphCorpus render_digits(Rng& rng, std::size_t count) {
  constexpr std::size_t kSide = 28, kCell = 4;
  GlyphCorpus out;
  out.pixels.assign(count * kSide * kSide, 0);
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int digit = static_cast<int>(i % 10);
    out.labels[i] = static_cast<std::uint8_t>(digit);
    const unsigned seg = kDigitSegments[digit];
    const int dy = static_cast<int>(rng.below(7)) - 3;
    const int dx = static_cast<int>(rng.below(7)) - 3;
    const double intensity = 0.55 + 0.45 * rng.uniform();
    std::uint8_t* img = out.pixels.data() + i * kSide * kSide;
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 7; ++c) {
        if (!glyph_cell(seg, r, c)) continue;
        for (std::size_t py = 0; py < kCell; ++py) {
          for (std::size_t px = 0; px < kCell; ++px) {
            const int y = static_cast<int>(r * kCell + py) + dy;
            const int x = static_cast<int>(c * kCell + px) + dx;
            if (y < 0 || y >= static_cast<int>(kSide) || x < 0 ||
                x >= static_cast<int>(kSide)) {
              continue;
            }
            img[y * kSide + x] = static_cast<std::uint8_t>(255.0 * intensity);
          }
        }
      }
    }
    for (std::size_t p = 0; p < kSide * kSide; ++p) {
      const double v = img[p] + rng.uniform(0.0, 40.0);
      img[p] = static_cast<std::uint8_t>(std::min(v, 255.0));
    }
  }
  return out;
}

}  // namespace

Dataset synthetic_digits(std::uint64_t seed, std::size_t train_count,
                         std::size_t test_count) {
  if (train_count == 0 || test_count == 0) {
    throw ValidationError("synthetic digits: zero-sized split");
  }
  Rng rng(seed);
  const GlyphCorpus train = render_digits(rng, train_count);
  const GlyphCorpus test = render_digits(rng, test_count);

  Dataset d;
  d.num_classes = 10;
  d.mean = {0.1307};
  d.stddev = {0.3081};
  d.train = make_split(train.pixels.data(), train.labels, train_count, 1, 28,
                       28, d.mean, d.stddev, 10, "synthetic digits");
  d.test = make_split(test.pixels.data(), test.labels, test_count, 1, 28, 28,
                      d.mean, d.stddev, 10, "synthetic digits");
  return d;
}

void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t h, std::size_t w) {
  if (pixels.size() != count * h * w) {
    throw ValidationError(path + ": pixel buffer does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  auto put_u32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
  };
  put_u32(0x803);
  put_u32(static_cast<std::uint32_t>(count));
  put_u32(static_cast<std::uint32_t>(h));
  put_u32(static_cast<std::uint32_t>(w));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("short write to " + path);
}

void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  auto put_u32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
  };
  put_u32(0x801);
  put_u32(static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw IoError("short write to " + path);
}

void write_synthetic_mnist(const std::string& dir, std::uint64_t seed,
                           std::size_t train_count, std::size_t test_count) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  const GlyphCorpus train = render_digits(rng, train_count);
  const GlyphCorpus test = render_digits(rng, test_count);
  write_idx_images(dir + "/train-images-idx3-ubyte", train.pixels, train_count,
                   28, 28);
  write_idx_labels(dir + "/train-labels-idx1-ubyte", train.labels);
  write_idx_images(dir + "/t10k-images-idx3-ubyte", test.pixels, test_count,
                   28, 28);
  write_idx_labels(dir + "/t10k-labels-idx1-ubyte", test.labels);
}

// ---------------------------------------------------------------------------
// Model zoo
// ---------------------------------------------------------------------------

ModelSpec model_zoo(const std::string& name, std::size_t in_ch,
                    std::size_t in_h, std::size_t in_w,
                    std::size_t num_classes) {
  ModelSpec spec;
  spec.name = name;
  spec.in_ch = in_ch;
  spec.in_h = in_h;
  spec.in_w = in_w;
  spec.num_classes = num_classes;
  if (name == "tiny-cnn") {
    spec.layers.push_back(ConvLayerSpec{16, in_ch, 5, 5, ConvGeom{1, 1, 2, 2}});
    spec.layers.push_back(ReluLayerSpec{});
    spec.layers.push_back(MaxPoolLayerSpec{});
    spec.layers.push_back(ConvLayerSpec{32, 16, 5, 5, ConvGeom{1, 1, 2, 2}});
    spec.layers.push_back(ReluLayerSpec{});
    spec.layers.push_back(MaxPoolLayerSpec{});
    spec.layers.push_back(FlattenLayerSpec{});
    const std::size_t feat = 32 * (in_h / 4) * (in_w / 4);
    spec.layers.push_back(LinearLayerSpec{num_classes, feat});
  } else if (name == "micro-cnn") {
    spec.layers.push_back(ConvLayerSpec{8, in_ch, 3, 3, ConvGeom{1, 1, 1, 1}});
    spec.layers.push_back(ReluLayerSpec{});
    spec.layers.push_back(MaxPoolLayerSpec{});
    spec.layers.push_back(FlattenLayerSpec{});
    const std::size_t feat = 8 * (in_h / 2) * (in_w / 2);
    spec.layers.push_back(LinearLayerSpec{num_classes, feat});
  } else {
    throw ValidationError("unknown model '" + name +
                          "'; available: micro-cnn, tiny-cnn");
  }
  validate(spec);
  return spec;
}

}  // namespace trp
