#pragma once

#include <span>
#include <string>
#include <vector>

#include "fadv/attacks.hpp"
#include "fadv/data.hpp"
#include "fadv/dct.hpp"

namespace fadv::analysis {

enum class Granularity { PerFrequency, Band16, Band4 };

/// One value per frequency (64) or per band (16 or 4), in zigzag order.
struct SpectrumReport {
  std::string metric;
  std::string model_id;
  std::vector<std::string> labels;
  std::vector<double> values;
  int samples = 0;
};

struct HeatmapGrid {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<double> cells;       // row-major
  std::vector<std::uint8_t> present;  // 0 marks a row whose checkpoint was missing

  double at(std::size_t row, std::size_t col) const;
  bool row_present(std::size_t row) const;
};

/// Mean |DCT coefficient| of d(y_max)/d(delta) per zigzag index, taken at the
/// attacked input x + delta, averaged over blocks, channels and samples.
SpectrumReport perturbation_gradient_spectrum(const attacks::TargetModel& target, const data::Dataset& dataset,
                                              const attacks::AttackConfig& attack, int sample_limit = 512);

/// Accuracy (percent) under the base attack restricted to each single
/// frequency or band. Low cells mark vulnerable frequencies.
SpectrumReport vulnerability_scores(const attacks::TargetModel& target, const data::Dataset& dataset,
                                    const attacks::AttackConfig& base, Granularity granularity,
                                    int sample_limit = 512);

enum class ClassSource { TrueLabel, Predicted };

/// Mean |logit_c(x) - logit_c(x with frequency f zeroed)| per frequency,
/// where c is the true label (default) or the model's prediction on x.
SpectrumReport occlusion_scores(const attacks::TargetModel& target, const data::Dataset& dataset,
                                ClassSource source = ClassSource::TrueLabel, int sample_limit = 512);

/// Cell (i, j): accuracy of model i under the base attack constrained to
/// mask j. A null model marks its row absent.
HeatmapGrid robustness_heatmap(std::span<const attacks::TargetModel> targets,
                               std::span<const dct::FrequencyMask> attack_masks,
                               std::span<const std::string> mask_labels, const data::Dataset& dataset,
                               const attacks::AttackConfig& base, int sample_limit = 512);

/// Rank-based remap to [0, 1]: ranks spread evenly, ties share their mean
/// rank, an all-equal input collapses to 0.5.
std::vector<double> histogram_equalize(std::span<const double> values);

std::vector<std::string> spectrum_csv_header(const SpectrumReport& report);
std::vector<std::vector<std::string>> spectrum_csv_rows(const SpectrumReport& report);
std::vector<std::string> heatmap_csv_header(const HeatmapGrid& grid);
std::vector<std::vector<std::string>> heatmap_csv_rows(const HeatmapGrid& grid);

}  // namespace fadv::analysis
