#include "fadv/dct.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fadv/rng.hpp"

namespace fadv::dct {

DctPlan::DctPlan() {
  const double n_inv = 1.0 / kBlock;
  for (int k = 0; k < kBlock; ++k) {
    const double lambda = std::sqrt((k == 0 ? 1.0 : 2.0) * n_inv);
    for (int n = 0; n < kBlock; ++n) {
      basis_[k][n] = lambda * std::cos((2 * n + 1) * k * std::numbers::pi / (2.0 * kBlock));
    }
  }
}

void DctPlan::forward_block(const double* in, std::size_t stride, double* out64) const {
  // G = W X W^T, applied as rows then columns.
  double tmp[kBlock][kBlock];
  for (int k = 0; k < kBlock; ++k) {
    for (int c = 0; c < kBlock; ++c) {
      double s = 0.0;
      for (int n = 0; n < kBlock; ++n) s += basis_[k][n] * in[n * stride + c];
      tmp[k][c] = s;
    }
  }
  for (int k = 0; k < kBlock; ++k) {
    for (int k2 = 0; k2 < kBlock; ++k2) {
      double s = 0.0;
      for (int n = 0; n < kBlock; ++n) s += tmp[k][n] * basis_[k2][n];
      out64[k * kBlock + k2] = s;
    }
  }
}

void DctPlan::inverse_block(const double* in64, double* out, std::size_t stride) const {
  // X = W^T G W.
  double tmp[kBlock][kBlock];
  for (int n = 0; n < kBlock; ++n) {
    for (int c = 0; c < kBlock; ++c) {
      double s = 0.0;
      for (int k = 0; k < kBlock; ++k) s += basis_[k][n] * in64[k * kBlock + c];
      tmp[n][c] = s;
    }
  }
  for (int n = 0; n < kBlock; ++n) {
    for (int n2 = 0; n2 < kBlock; ++n2) {
      double s = 0.0;
      for (int k = 0; k < kBlock; ++k) s += tmp[n][k] * basis_[k][n2];
      out[n * stride + n2] = s;
    }
  }
}

ZigzagMap::ZigzagMap() {
  int u = 0, v = 0;
  bool up = true;
  for (int z = 0; z < kBlockCoeffs; ++z) {
    index_[u][v] = z;
    coord_[z] = {u, v};
    if (z == kBlockCoeffs - 1) break;
    if (up) {
      if (v == kBlock - 1) {
        ++u;
        up = false;
      } else if (u == 0) {
        ++v;
        up = false;
      } else {
        --u;
        ++v;
      }
    } else {
      if (u == kBlock - 1) {
        ++v;
        up = true;
      } else if (v == 0) {
        ++u;
        up = true;
      } else {
        ++u;
        --v;
      }
    }
  }
}

int ZigzagMap::to_index(int u, int v) const {
  if (u < 0 || u >= kBlock || v < 0 || v >= kBlock) {
    throw std::out_of_range("zigzag: coordinate out of range");
  }
  return index_[u][v];
}

std::pair<int, int> ZigzagMap::to_coord(int z) const {
  if (z < 0 || z >= kBlockCoeffs) throw std::out_of_range("zigzag: index out of range");
  return coord_[z];
}

const DctPlan& plan() {
  static const DctPlan p;
  return p;
}

const ZigzagMap& zigzag() {
  static const ZigzagMap z;
  return z;
}

std::string Band::to_string() const { return "b" + std::to_string(lo) + "-" + std::to_string(hi); }

Band Band::parse(const std::string& text) {
  if (text.size() < 4 || text[0] != 'b') throw std::invalid_argument("band: expected b<lo>-<hi>, got '" + text + "'");
  auto dash = text.find('-', 1);
  if (dash == std::string::npos) throw std::invalid_argument("band: expected b<lo>-<hi>, got '" + text + "'");
  Band b;
  try {
    std::size_t used = 0;
    b.lo = std::stoi(text.substr(1, dash - 1), &used);
    if (used != dash - 1) throw std::invalid_argument("");
    b.hi = std::stoi(text.substr(dash + 1), &used);
    if (used != text.size() - dash - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("band: expected b<lo>-<hi>, got '" + text + "'");
  }
  b.validate();
  return b;
}

void Band::validate() const {
  if (lo < 0 || hi >= kBlockCoeffs || lo > hi) {
    throw std::invalid_argument("band: invalid range " + std::to_string(lo) + ".." + std::to_string(hi));
  }
}

FrequencyMask FrequencyMask::all() { return FrequencyMask(); }

FrequencyMask FrequencyMask::none() {
  FrequencyMask m;
  m.keep_.fill(false);
  return m;
}

FrequencyMask FrequencyMask::from_indices(std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("mask: empty keep set");
  FrequencyMask m = none();
  for (int z : indices) {
    if (z < 0 || z >= kBlockCoeffs) throw std::invalid_argument("mask: index " + std::to_string(z) + " out of range");
    m.keep_[z] = true;
  }
  return m;
}

FrequencyMask FrequencyMask::from_band(Band band) {
  band.validate();
  FrequencyMask m = none();
  for (int z = band.lo; z <= band.hi; ++z) m.keep_[z] = true;
  return m;
}

FrequencyMask FrequencyMask::from_bands(std::span<const Band> bands) {
  if (bands.empty()) throw std::invalid_argument("mask: empty band list");
  FrequencyMask m = none();
  for (const Band& b : bands) {
    b.validate();
    for (int z = b.lo; z <= b.hi; ++z) m.keep_[z] = true;
  }
  return m;
}

FrequencyMask FrequencyMask::from_string(const std::string& text) {
  if (text.size() != kBlockCoeffs) {
    throw std::invalid_argument("mask: expected 64 chars of 0/1, got length " + std::to_string(text.size()));
  }
  FrequencyMask m = none();
  int kept = 0;
  for (int z = 0; z < kBlockCoeffs; ++z) {
    if (text[z] == '1') {
      m.keep_[z] = true;
      ++kept;
    } else if (text[z] != '0') {
      throw std::invalid_argument("mask: expected 64 chars of 0/1");
    }
  }
  if (kept == 0) throw std::invalid_argument("mask: empty keep set");
  return m;
}

bool FrequencyMask::keeps(int z) const {
  if (z < 0 || z >= kBlockCoeffs) throw std::out_of_range("mask: index out of range");
  return keep_[z];
}

void FrequencyMask::set(int z, bool keep) {
  if (z < 0 || z >= kBlockCoeffs) throw std::out_of_range("mask: index out of range");
  keep_[z] = keep;
}

int FrequencyMask::count_kept() const {
  int n = 0;
  for (bool k : keep_) n += k ? 1 : 0;
  return n;
}

FrequencyMask FrequencyMask::complement() const {
  FrequencyMask m;
  for (int z = 0; z < kBlockCoeffs; ++z) m.keep_[z] = !keep_[z];
  return m;
}

std::string FrequencyMask::to_string() const {
  std::string s(kBlockCoeffs, '0');
  for (int z = 0; z < kBlockCoeffs; ++z) {
    if (keep_[z]) s[z] = '1';
  }
  return s;
}

FrequencyMask make_mask(const MaskSpec& spec) {
  if (const auto* ix = std::get_if<MaskSpec::Indices>(&spec.value)) {
    return FrequencyMask::from_indices(ix->keep);
  }
  if (const auto* bs = std::get_if<MaskSpec::Bands>(&spec.value)) {
    return FrequencyMask::from_bands(bs->keep);
  }
  const auto& drop = std::get<MaskSpec::Drop>(spec.value);
  auto rng = make_stream(drop.seed, Stream::DropMask);
  return make_drop_mask(drop.band, drop.p, rng);
}

FrequencyMask make_drop_mask(Band band, double p, std::mt19937_64& rng) {
  band.validate();
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("drop mask: p must lie in [0, 1]");
  FrequencyMask m = FrequencyMask::all();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int z = band.lo; z <= band.hi; ++z) {
    if (u(rng) < p) m.set(z, false);
  }
  return m;
}

std::vector<Band> band_partition(int count) {
  if (count <= 0 || kBlockCoeffs % count != 0) {
    throw std::invalid_argument("band partition: count must divide 64");
  }
  const int width = kBlockCoeffs / count;
  std::vector<Band> bands;
  bands.reserve(count);
  for (int i = 0; i < count; ++i) bands.push_back(Band{i * width, (i + 1) * width - 1});
  return bands;
}

namespace {

struct BlockLayout {
  std::size_t channels, height, width;
};

BlockLayout block_layout(const Tensor& t, const char* what) {
  if (t.rank() < 2) throw std::invalid_argument(std::string(what) + ": rank must be >= 2");
  const std::size_t h = t.extent(t.rank() - 2);
  const std::size_t w = t.extent(t.rank() - 1);
  if (h == 0 || w == 0 || h % kBlock != 0 || w % kBlock != 0) {
    throw std::invalid_argument(std::string(what) + ": height and width must be nonzero multiples of 8, got " +
                                t.shape_string());
  }
  return {t.size() / (h * w), h, w};
}

template <typename Fn>
void for_each_block(const BlockLayout& lay, Fn&& fn) {
  for (std::size_t c = 0; c < lay.channels; ++c) {
    const std::size_t base = c * lay.height * lay.width;
    for (std::size_t by = 0; by < lay.height; by += kBlock) {
      for (std::size_t bx = 0; bx < lay.width; bx += kBlock) {
        fn(base + by * lay.width + bx);
      }
    }
  }
}

}  // namespace

Tensor dct2_blockwise(const Tensor& x) {
  const BlockLayout lay = block_layout(x, "dct2_blockwise");
  const DctPlan& p = plan();
  Tensor out(x.shape());
  double coeffs[kBlockCoeffs];
  for_each_block(lay, [&](std::size_t offset) {
    p.forward_block(x.data() + offset, lay.width, coeffs);
    for (int u = 0; u < kBlock; ++u) {
      for (int v = 0; v < kBlock; ++v) {
        out[offset + static_cast<std::size_t>(u) * lay.width + v] = coeffs[u * kBlock + v];
      }
    }
  });
  return out;
}

Tensor idct2_blockwise(const Tensor& g) {
  const BlockLayout lay = block_layout(g, "idct2_blockwise");
  const DctPlan& p = plan();
  Tensor out(g.shape());
  double coeffs[kBlockCoeffs];
  for_each_block(lay, [&](std::size_t offset) {
    for (int u = 0; u < kBlock; ++u) {
      for (int v = 0; v < kBlock; ++v) {
        coeffs[u * kBlock + v] = g[offset + static_cast<std::size_t>(u) * lay.width + v];
      }
    }
    p.inverse_block(coeffs, out.data() + offset, lay.width);
  });
  return out;
}

Tensor apply_mask_freq(const Tensor& t, const FrequencyMask& mask, MaskDomain domain) {
  const ZigzagMap& zz = zigzag();
  Tensor coeffs = domain == MaskDomain::Spatial ? dct2_blockwise(t) : t;
  const BlockLayout lay = block_layout(coeffs, "apply_mask_freq");
  for_each_block(lay, [&](std::size_t offset) {
    for (int z = 0; z < kBlockCoeffs; ++z) {
      if (mask.keeps(z)) continue;
      auto [u, v] = zz.to_coord(z);
      coeffs[offset + static_cast<std::size_t>(u) * lay.width + v] = 0.0;
    }
  });
  return domain == MaskDomain::Spatial ? idct2_blockwise(coeffs) : coeffs;
}

double out_of_subspace_energy(const Tensor& t, const FrequencyMask& kept) {
  const Tensor coeffs = dct2_blockwise(t);
  const BlockLayout lay = block_layout(coeffs, "out_of_subspace_energy");
  const ZigzagMap& zz = zigzag();
  double outside = 0.0, total = 0.0;
  for_each_block(lay, [&](std::size_t offset) {
    for (int z = 0; z < kBlockCoeffs; ++z) {
      auto [u, v] = zz.to_coord(z);
      const double c = coeffs[offset + static_cast<std::size_t>(u) * lay.width + v];
      total += c * c;
      if (!kept.keeps(z)) outside += c * c;
    }
  });
  return total > 0.0 ? outside / total : 0.0;
}

}  // namespace fadv::dct
