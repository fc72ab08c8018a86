#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fadv/tensor.hpp"

namespace fadv::dct {

inline constexpr int kBlock = 8;
inline constexpr int kBlockCoeffs = kBlock * kBlock;

/// Orthonormal 8x8 DCT-II context. basis(k, n) = lambda_k * cos((2n+1)k*pi/16)
/// with lambda_0 = sqrt(1/8) and lambda_k = sqrt(2/8) otherwise, so the
/// transform matrix is orthogonal and the 2-D blockwise transform preserves
/// energy exactly.
class DctPlan {
 public:
  DctPlan();

  double basis(int k, int n) const { return basis_[k][n]; }

  /// 2-D transform of one 8x8 block. `in` points at the top-left pixel,
  /// `stride` is the row step; coefficients land in `out64` row-major (u, v).
  void forward_block(const double* in, std::size_t stride, double* out64) const;

  /// Inverse of forward_block.
  void inverse_block(const double* in64, double* out, std::size_t stride) const;

 private:
  std::array<std::array<double, kBlock>, kBlock> basis_;
};

/// Bijection between the zigzag index 0..63 and the (u, v) coordinate of the
/// 8x8 coefficient block, in the JPEG scan order: 0 is DC, 63 is (7,7).
class ZigzagMap {
 public:
  ZigzagMap();
  int to_index(int u, int v) const;
  std::pair<int, int> to_coord(int z) const;

 private:
  std::array<std::array<int, kBlock>, kBlock> index_;
  std::array<std::pair<int, int>, kBlockCoeffs> coord_;
};

/// Shared instances; both objects are immutable after construction.
const DctPlan& plan();
const ZigzagMap& zigzag();

/// Inclusive zigzag index range.
struct Band {
  int lo = 0;
  int hi = 0;

  bool contains(int z) const { return z >= lo && z <= hi; }
  int size() const { return hi - lo + 1; }
  bool operator==(const Band&) const = default;
  std::string to_string() const;
  static Band parse(const std::string& text);  // "b<lo>-<hi>"
  void validate() const;
};

/// Per-block keep/zero flags addressed by zigzag index. Channel-agnostic: the
/// same flags apply to every block of every channel.
class FrequencyMask {
 public:
  FrequencyMask() { keep_.fill(true); }

  static FrequencyMask all();
  static FrequencyMask none();
  static FrequencyMask from_indices(std::span<const int> indices);
  static FrequencyMask from_band(Band band);
  static FrequencyMask from_bands(std::span<const Band> bands);
  static FrequencyMask from_string(const std::string& text);  // 64 chars of 0/1

  bool keeps(int z) const;
  void set(int z, bool keep);
  int count_kept() const;
  bool all_kept() const { return count_kept() == kBlockCoeffs; }
  FrequencyMask complement() const;
  std::string to_string() const;
  bool operator==(const FrequencyMask&) const = default;

 private:
  std::array<bool, kBlockCoeffs> keep_;
};

/// Declarative mask construction, as written in experiment configs.
struct MaskSpec {
  struct Indices {
    std::vector<int> keep;
  };
  struct Bands {
    std::vector<Band> keep;
  };
  /// Keep everything outside `band`; inside it, zero each index independently
  /// with probability `p`.
  struct Drop {
    Band band;
    double p = 0.0;
    std::uint64_t seed = 0;
  };
  std::variant<Indices, Bands, Drop> value;
};

FrequencyMask make_mask(const MaskSpec& spec);

/// One fresh drop draw; consumes one uniform per index of `band`, low to high.
FrequencyMask make_drop_mask(Band band, double p, std::mt19937_64& rng);

/// Contiguous equal split of 0..63 into `count` bands (count must divide 64).
std::vector<Band> band_partition(int count);

inline constexpr Band kLowHalf{0, 31};
inline constexpr Band kHighHalf{32, 63};

/// Blockwise 2-D transform of every 8x8 tile of every channel. Accepts rank
/// >= 2 with the last two extents being height and width; both must be
/// multiples of 8. Output has the same shape, with the coefficient (u, v) of
/// each block stored at the block's (row u, col v) position.
Tensor dct2_blockwise(const Tensor& x);
Tensor idct2_blockwise(const Tensor& g);

enum class MaskDomain { Spatial, AlreadyDct };

/// Zero the masked-out coefficients of every block. Spatial input is carried
/// through the transform and back; AlreadyDct input is masked in place.
Tensor apply_mask_freq(const Tensor& t, const FrequencyMask& mask, MaskDomain domain);

/// Fraction of blockwise DCT energy outside the kept set. 0 for an all-zero
/// tensor.
double out_of_subspace_energy(const Tensor& t, const FrequencyMask& kept);

}  // namespace fadv::dct
