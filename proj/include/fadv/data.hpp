#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fadv/dct.hpp"
#include "fadv/tensor.hpp"

namespace fadv::data {

/// One sample: pixels in [0, 1], shape (C, H, W).
struct LabeledImage {
  Tensor pixels;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledImage> items;
  int classes = 0;

  std::size_t size() const { return items.size(); }
  std::vector<std::size_t> image_shape() const;
};

/// One CIFAR-10 binary file: records of 1 label byte + 3x1024 planar pixel
/// bytes, scaled to [0, 1].
Dataset load_cifar10_file(const std::filesystem::path& path);

struct Cifar10 {
  Dataset train;
  Dataset test;
};

/// Reads data_batch_1..5.bin (whichever exist; at least one required) and
/// test_batch.bin from `dir`.
Cifar10 load_cifar10_binary(const std::filesystem::path& dir);

/// Exports images to the CIFAR record layout. Single-channel images are
/// replicated across R, G, B.
void write_cifar10_records(const std::filesystem::path& path, std::span<const LabeledImage> images);

/// Class identity lives in fixed DCT coefficients: every 8x8 block of a class
/// carries the same template over the informative band, the nuisance band is
/// filled with per-sample uniform noise, and Gaussian pixel noise is added on
/// top. Ground truth about which frequencies matter is therefore exact.
struct SyntheticSpec {
  int classes = 4;
  int channels = 1;
  int height = 32;
  int width = 32;
  dct::Band informative{1, 8};
  dct::Band nuisance{40, 55};
  std::vector<std::vector<double>> templates;  // classes x informative.size()
  double nuisance_amplitude = 0.08;
  double noise_sigma = 0.02;
  int train_count = 2000;
  int test_count = 500;
  std::uint64_t seed = 1;

  /// Spec with sign-pattern templates (rows of an 8x8 Hadamard matrix scaled
  /// by `amplitude`), which keeps class centroids equidistant.
  static SyntheticSpec defaults(std::uint64_t seed = 1, double amplitude = 0.18);

  void validate() const;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Per-channel affine remap x -> (x - mean) / std.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> std_dev;

  static Normalization identity(int channels);
  bool is_identity() const;
  void validate() const;
};

Normalization compute_normalization(const Dataset& dataset);

Tensor normalize(const Tensor& x, const Normalization& norm);
Tensor denormalize(const Tensor& x, const Normalization& norm);

/// Index batches for one epoch: a seeded shuffle chunked into `batch_size`
/// groups, last one partial.
std::vector<std::vector<int>> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng);

/// Stacks the chosen samples into a (B, C, H, W) batch.
Tensor gather_batch(const Dataset& dataset, std::span<const int> indices, std::vector<int>* labels);

}  // namespace fadv::data
