#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trp/nn.hpp"
#include "trp/tensor4.hpp"

namespace trp {

struct Split {
  Tensor4 images;  // (count, channels, h, w), normalized
  std::vector<int> labels;

  std::size_t count() const { return images.dims[0]; }
};

struct Dataset {
  Split train;
  Split test;
  std::size_t num_classes = 0;
  // Per-channel standardization applied after scaling bytes to [0,1];
  // kept so normalization can be inverted exactly.
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// MNIST in IDX format from `dir` (train-images-idx3-ubyte & friends).
/// Limits of 0 mean "all"; otherwise the first N examples of each split.
/// Pixels are scaled to [0,1] and standardized with mean 0.1307, std 0.3081.
Dataset load_mnist_idx(const std::string& dir, std::size_t train_limit = 0,
                       std::size_t test_limit = 0);

/// CIFAR-10 binary batches from `dir` (data_batch_1..5.bin, test_batch.bin).
/// Limits are per class (first N of each label); 0 means "all". Channels are
/// standardized with mean (0.4914, 0.4822, 0.4465), std (0.2470, 0.2435,
/// 0.2616).
Dataset load_cifar10_binary(const std::string& dir,
                            std::size_t train_per_class = 0,
                            std::size_t test_per_class = 0);

/// Gaussian class-template blobs: sample = template + 0.3 * noise, which a
/// linear probe separates at the defaults. Deterministic per seed. The test
/// split holds max(1, n_per_class / 5) examples per class.
Dataset synthetic_blobs(std::uint64_t seed, std::size_t n_per_class,
                        std::size_t classes, std::size_t image_size,
                        std::size_t channels = 1);

/// Seeded 28x28 digit-glyph corpus (segment-rendered digits with shift,
/// intensity and noise jitter), same normalization as MNIST. Stands in for
/// MNIST where the real files are unavailable.
Dataset synthetic_digits(std::uint64_t seed, std::size_t train_count,
                         std::size_t test_count);

/// Writes the synthetic_digits corpus as bona-fide IDX files into `dir`
/// using the standard MNIST file names, so it loads through load_mnist_idx.
void write_synthetic_mnist(const std::string& dir, std::uint64_t seed,
                           std::size_t train_count, std::size_t test_count);

/// Raw IDX writers (also used by test fixtures). `pixels` holds count*h*w
/// bytes row-major.
void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t h, std::size_t w);
void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels);

/// Named model architectures. Throws ValidationError for unknown names,
/// listing the available ones.
ModelSpec model_zoo(const std::string& name, std::size_t in_ch,
                    std::size_t in_h, std::size_t in_w,
                    std::size_t num_classes);

}  // namespace trp
