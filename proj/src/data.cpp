#include "fadv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fadv/rng.hpp"

namespace fadv::data {

namespace {

constexpr std::size_t kCifarDim = 32;
constexpr std::size_t kCifarPlane = kCifarDim * kCifarDim;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;
constexpr int kCifarClasses = 10;

}  // namespace

std::vector<std::size_t> Dataset::image_shape() const {
  if (items.empty()) throw std::runtime_error("dataset: empty");
  return items.front().pixels.shape();
}

Dataset load_cifar10_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw std::runtime_error("corrupt CIFAR-10 file " + path.string() + ": size " + std::to_string(bytes.size()) +
                             " is not a multiple of " + std::to_string(kCifarRecord));
  }
  Dataset ds;
  ds.classes = kCifarClasses;
  const std::size_t records = bytes.size() / kCifarRecord;
  ds.items.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kCifarRecord;
    const int label = rec[0];
    if (label >= kCifarClasses) {
      throw std::runtime_error("corrupt CIFAR-10 file " + path.string() + ": record " + std::to_string(r) +
                               " has label " + std::to_string(label));
    }
    LabeledImage img;
    img.label = label;
    img.pixels = Tensor({3, kCifarDim, kCifarDim});
    for (std::size_t i = 0; i < 3 * kCifarPlane; ++i) img.pixels[i] = rec[1 + i] / 255.0;
    ds.items.push_back(std::move(img));
  }
  return ds;
}

Cifar10 load_cifar10_binary(const std::filesystem::path& dir) {
  Cifar10 out;
  out.train.classes = kCifarClasses;
  bool any = false;
  for (int i = 1; i <= 5; ++i) {
    const auto path = dir / ("data_batch_" + std::to_string(i) + ".bin");
    if (!std::filesystem::exists(path)) continue;
    Dataset batch = load_cifar10_file(path);
    for (auto& item : batch.items) out.train.items.push_back(std::move(item));
    any = true;
  }
  if (!any) throw std::runtime_error("no data_batch_*.bin found under " + dir.string());
  out.test = load_cifar10_file(dir / "test_batch.bin");
  return out;
}

void write_cifar10_records(const std::filesystem::path& path, std::span<const LabeledImage> images) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const LabeledImage& img : images) {
    const auto& shape = img.pixels.shape();
    if (shape.size() != 3 || shape[1] != kCifarDim || shape[2] != kCifarDim || (shape[0] != 1 && shape[0] != 3)) {
      throw std::invalid_argument("cifar export: image shape " + img.pixels.shape_string() + " unsupported");
    }
    if (img.label < 0 || img.label >= kCifarClasses) {
      throw std::invalid_argument("cifar export: label " + std::to_string(img.label) + " out of range");
    }
    out.put(static_cast<char>(img.label));
    for (std::size_t plane = 0; plane < 3; ++plane) {
      const std::size_t src_plane = shape[0] == 3 ? plane : 0;
      for (std::size_t i = 0; i < kCifarPlane; ++i) {
        const double v = img.pixels[src_plane * kCifarPlane + i];
        const long byte = std::lround(v * 255.0);
        out.put(static_cast<char>(std::clamp(byte, 0L, 255L)));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SyntheticSpec SyntheticSpec::defaults(std::uint64_t seed, double amplitude) {
  SyntheticSpec spec;
  spec.seed = seed;
  // Sylvester Hadamard rows 1..classes over the 8 informative coefficients:
  // any two differ in exactly half the signs.
  const int n = spec.informative.size();
  if (n != 8) throw std::invalid_argument("synthetic defaults: informative band must have 8 indices");
  auto hadamard_entry = [](int row, int col) {
    int bits = row & col;
    int parity = 0;
    while (bits != 0) {
      parity ^= bits & 1;
      bits >>= 1;
    }
    return parity == 0 ? 1.0 : -1.0;
  };
  spec.templates.resize(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    spec.templates[c].resize(n);
    for (int j = 0; j < n; ++j) spec.templates[c][j] = amplitude * hadamard_entry(c + 1, j);
  }
  spec.validate();
  return spec;
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("synthetic: classes must be >= 2");
  if (channels <= 0 || height <= 0 || width <= 0 || height % dct::kBlock != 0 || width % dct::kBlock != 0) {
    throw std::invalid_argument("synthetic: extents must be positive multiples of 8");
  }
  informative.validate();
  nuisance.validate();
  if (informative.hi >= nuisance.lo && nuisance.hi >= informative.lo) {
    throw std::invalid_argument("synthetic: informative and nuisance bands overlap");
  }
  if (templates.size() != static_cast<std::size_t>(classes)) {
    throw std::invalid_argument("synthetic: need one template per class");
  }
  for (const auto& t : templates) {
    if (t.size() != static_cast<std::size_t>(informative.size())) {
      throw std::invalid_argument("synthetic: template length must match informative band size");
    }
  }
  for (std::size_t a = 0; a < templates.size(); ++a) {
    for (std::size_t b = a + 1; b < templates.size(); ++b) {
      if (templates[a] == templates[b]) throw std::invalid_argument("synthetic: duplicate class templates");
    }
  }
  if (nuisance_amplitude < 0.0 || noise_sigma < 0.0) {
    throw std::invalid_argument("synthetic: amplitudes must be >= 0");
  }
  if (train_count < 0 || test_count < 0) throw std::invalid_argument("synthetic: counts must be >= 0");
}

namespace {

LabeledImage synthesize_one(const SyntheticSpec& spec, int label, std::mt19937_64& rng) {
  const std::size_t h = static_cast<std::size_t>(spec.height);
  const std::size_t w = static_cast<std::size_t>(spec.width);
  Tensor coeffs({static_cast<std::size_t>(spec.channels), h, w});
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto& zz = dct::zigzag();
  // Per block: DC puts the pixel base at 0.5, the class template fills the
  // informative band, fresh uniform draws fill the nuisance band.
  for (std::size_t c = 0; c < static_cast<std::size_t>(spec.channels); ++c) {
    for (std::size_t by = 0; by < h; by += dct::kBlock) {
      for (std::size_t bx = 0; bx < w; bx += dct::kBlock) {
        const std::size_t base = c * h * w + by * w + bx;
        auto put = [&](int z, double value) {
          auto [u, v] = zz.to_coord(z);
          coeffs[base + static_cast<std::size_t>(u) * w + v] = value;
        };
        put(0, 0.5 * dct::kBlock);
        for (int j = 0; j < spec.informative.size(); ++j) {
          put(spec.informative.lo + j, spec.templates[static_cast<std::size_t>(label)][static_cast<std::size_t>(j)]);
        }
        for (int z = spec.nuisance.lo; z <= spec.nuisance.hi; ++z) {
          put(z, spec.nuisance_amplitude * uni(rng));
        }
      }
    }
  }
  LabeledImage img;
  img.label = label;
  img.pixels = dct::idct2_blockwise(coeffs);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    double v = img.pixels[i];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * gauss(rng);
    img.pixels[i] = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

Dataset synthesize_split(const SyntheticSpec& spec, int count, std::uint64_t split_tag) {
  Dataset ds;
  ds.classes = spec.classes;
  ds.items.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // One stream per (seed, split, index): sample identity does not depend on
    // how many samples are generated or in what order.
    auto rng = make_stream(spec.seed, Stream::Synthetic, (split_tag << 32) | static_cast<std::uint64_t>(i));
    ds.items.push_back(synthesize_one(spec, i % spec.classes, rng));
  }
  return ds;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.train = synthesize_split(spec, spec.train_count, 0);
  out.test = synthesize_split(spec, spec.test_count, 1);
  return out;
}

Normalization Normalization::identity(int channels) {
  Normalization n;
  n.mean.assign(static_cast<std::size_t>(channels), 0.0);
  n.std_dev.assign(static_cast<std::size_t>(channels), 1.0);
  return n;
}

bool Normalization::is_identity() const {
  for (double m : mean) {
    if (m != 0.0) return false;
  }
  for (double s : std_dev) {
    if (s != 1.0) return false;
  }
  return true;
}

void Normalization::validate() const {
  if (mean.empty() || mean.size() != std_dev.size()) throw std::invalid_argument("normalization: bad channel count");
  for (double s : std_dev) {
    if (!(s > 0.0)) throw std::invalid_argument("normalization: std must be > 0");
  }
}

Normalization compute_normalization(const Dataset& dataset) {
  if (dataset.items.empty()) throw std::invalid_argument("normalization: empty dataset");
  const auto shape = dataset.image_shape();
  const std::size_t channels = shape[0];
  const std::size_t plane = shape[1] * shape[2];
  Normalization n;
  n.mean.assign(channels, 0.0);
  n.std_dev.assign(channels, 0.0);
  const double count = static_cast<double>(dataset.items.size() * plane);
  for (const LabeledImage& img : dataset.items) {
    if (img.pixels.shape() != shape) throw std::invalid_argument("normalization: inconsistent image shapes");
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < plane; ++i) n.mean[c] += img.pixels[c * plane + i];
    }
  }
  for (std::size_t c = 0; c < channels; ++c) n.mean[c] /= count;
  for (const LabeledImage& img : dataset.items) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = img.pixels[c * plane + i] - n.mean[c];
        n.std_dev[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < channels; ++c) n.std_dev[c] = std::sqrt(n.std_dev[c] / count);
  n.validate();
  return n;
}

namespace {

Tensor affine_per_channel(const Tensor& x, const Normalization& norm, bool forward) {
  norm.validate();
  if (x.rank() != 3 && x.rank() != 4) throw std::invalid_argument("normalize: expected (C,H,W) or (B,C,H,W)");
  const std::size_t channels = x.extent(x.rank() - 3);
  if (channels != norm.mean.size()) {
    throw std::invalid_argument("normalize: tensor has " + std::to_string(channels) + " channels, normalization has " +
                                std::to_string(norm.mean.size()));
  }
  const std::size_t plane = x.extent(x.rank() - 2) * x.extent(x.rank() - 1);
  const std::size_t batch = x.rank() == 4 ? x.extent(0) : 1;
  Tensor out(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[base + i] = forward ? (x[base + i] - norm.mean[c]) / norm.std_dev[c]
                                : x[base + i] * norm.std_dev[c] + norm.mean[c];
      }
    }
  }
  return out;
}

}  // namespace

Tensor normalize(const Tensor& x, const Normalization& norm) { return affine_per_channel(x, norm, true); }

Tensor denormalize(const Tensor& x, const Normalization& norm) { return affine_per_channel(x, norm, false); }

std::vector<std::vector<int>> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be > 0");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Tensor gather_batch(const Dataset& dataset, std::span<const int> indices, std::vector<int>* labels) {
  if (indices.empty()) throw std::invalid_argument("gather: empty index list");
  const auto shape = dataset.image_shape();
  const std::size_t sample_size = shape[0] * shape[1] * shape[2];
  Tensor batch({indices.size(), shape[0], shape[1], shape[2]});
  if (labels != nullptr) labels->clear();
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const int idx = indices[s];
    if (idx < 0 || static_cast<std::size_t>(idx) >= dataset.items.size()) {
      throw std::out_of_range("gather: index " + std::to_string(idx) + " out of range");
    }
    const LabeledImage& img = dataset.items[static_cast<std::size_t>(idx)];
    if (img.pixels.shape() != shape) throw std::invalid_argument("gather: inconsistent image shapes");
    std::copy(img.pixels.data(), img.pixels.data() + sample_size, batch.data() + s * sample_size);
    if (labels != nullptr) labels->push_back(img.label);
  }
  return batch;
}

}  // namespace fadv::data
