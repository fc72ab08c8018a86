#include "fadv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fadv/io.hpp"
#include "fadv/rng.hpp"

namespace fadv::analysis {

namespace {

std::size_t sample_count(const data::Dataset& dataset, int limit) {
  if (dataset.items.empty()) throw std::invalid_argument("analysis: empty dataset");
  if (limit < 0) return dataset.items.size();
  return std::min(dataset.items.size(), static_cast<std::size_t>(limit));
}

std::vector<dct::Band> granularity_bands(Granularity g) {
  switch (g) {
    case Granularity::Band4:
      return dct::band_partition(4);
    case Granularity::Band16:
      return dct::band_partition(16);
    case Granularity::PerFrequency: {
      std::vector<dct::Band> bands;
      bands.reserve(dct::kBlockCoeffs);
      for (int z = 0; z < dct::kBlockCoeffs; ++z) bands.push_back(dct::Band{z, z});
      return bands;
    }
  }
  throw std::invalid_argument("analysis: unknown granularity");
}

}  // namespace

double HeatmapGrid::at(std::size_t row, std::size_t col) const {
  if (row >= row_labels.size() || col >= col_labels.size()) throw std::out_of_range("heatmap: cell out of range");
  return cells[row * col_labels.size() + col];
}

bool HeatmapGrid::row_present(std::size_t row) const {
  if (row >= row_labels.size()) throw std::out_of_range("heatmap: row out of range");
  return present[row] != 0;
}

SpectrumReport perturbation_gradient_spectrum(const attacks::TargetModel& target, const data::Dataset& dataset,
                                              const attacks::AttackConfig& attack, int sample_limit) {
  const std::size_t n = sample_count(dataset, sample_limit);
  SpectrumReport report;
  report.metric = "perturbation_gradient_spectrum";
  report.model_id = target.id;
  report.samples = static_cast<int>(n);
  report.values.assign(dct::kBlockCoeffs, 0.0);
  const auto& zz = dct::zigzag();
  std::size_t block_count = 0;
  std::mt19937_64 init_rng = make_stream(0, Stream::AttackInit);
  for (std::size_t s = 0; s < n; ++s) {
    const data::LabeledImage& item = dataset.items[s];
    // A failed attack still contributes: the gradient is read at whatever
    // x + delta the attack ended on.
    const attacks::AttackResult r = attacks::run_attack(target, item.pixels, item.label, attack, &init_rng);
    const attacks::TargetModel::Grad g =
        target.objective_gradient(r.adversarial, item.label, attacks::AttackObjective::MaxLogit);
    const Tensor coeffs = dct::dct2_blockwise(g.grad);
    const std::size_t h = coeffs.extent(coeffs.rank() - 2);
    const std::size_t w = coeffs.extent(coeffs.rank() - 1);
    const std::size_t channels = coeffs.size() / (h * w);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t by = 0; by < h; by += dct::kBlock) {
        for (std::size_t bx = 0; bx < w; bx += dct::kBlock) {
          const std::size_t base = ch * h * w + by * w + bx;
          for (int z = 0; z < dct::kBlockCoeffs; ++z) {
            auto [u, v] = zz.to_coord(z);
            report.values[static_cast<std::size_t>(z)] +=
                std::abs(coeffs[base + static_cast<std::size_t>(u) * w + static_cast<std::size_t>(v)]);
          }
          ++block_count;
        }
      }
    }
  }
  if (block_count > 0) {
    for (double& v : report.values) v /= static_cast<double>(block_count);
  }
  return report;
}

std::vector<double> histogram_equalize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("equalize: empty input");
  const std::size_t n = values.size();
  if (n == 1) return {0.5};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> out(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j);  // ties share the mean rank
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = mean_rank / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

SpectrumReport vulnerability_scores(const attacks::TargetModel& target, const data::Dataset& dataset,
                                    const attacks::AttackConfig& base, Granularity granularity, int sample_limit) {
  const std::size_t n = sample_count(dataset, sample_limit);
  const std::vector<dct::Band> bands = granularity_bands(granularity);
  SpectrumReport report;
  report.metric = "vulnerability";
  report.model_id = target.id;
  report.samples = static_cast<int>(n);
  for (const dct::Band& band : bands) {
    attacks::AttackConfig cfg = base;
    cfg.constraint = attacks::MaskConstraint{dct::FrequencyMask::from_band(band)};
    report.labels.push_back(band.to_string());
    report.values.push_back(attacks::accuracy_under_attack(target, dataset, cfg, static_cast<int>(n)));
  }
  return report;
}

SpectrumReport occlusion_scores(const attacks::TargetModel& target, const data::Dataset& dataset, ClassSource source,
                                int sample_limit) {
  const std::size_t n = sample_count(dataset, sample_limit);
  SpectrumReport report;
  report.metric = "occlusion";
  report.model_id = target.id;
  report.samples = static_cast<int>(n);
  report.values.assign(dct::kBlockCoeffs, 0.0);
  const auto& zz = dct::zigzag();
  for (std::size_t s = 0; s < n; ++s) {
    const data::LabeledImage& item = dataset.items[s];
    const Tensor base_logits = target.logits(item.pixels);
    const int c = source == ClassSource::TrueLabel ? item.label : nn::argmax_lowest(base_logits.values());
    if (c < 0 || c >= target.model->classes()) throw std::invalid_argument("occlusion: label out of range");
    const Tensor coeffs = dct::dct2_blockwise(item.pixels);
    const std::size_t h = coeffs.extent(coeffs.rank() - 2);
    const std::size_t w = coeffs.extent(coeffs.rank() - 1);
    const std::size_t channels = coeffs.size() / (h * w);
    for (int z = 0; z < dct::kBlockCoeffs; ++z) {
      // Zero one frequency in every block, reconstruct, and read off the
      // logit movement.
      Tensor masked = coeffs;
      auto [u, v] = zz.to_coord(z);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        for (std::size_t by = 0; by < h; by += dct::kBlock) {
          for (std::size_t bx = 0; bx < w; bx += dct::kBlock) {
            masked[ch * h * w + (by + static_cast<std::size_t>(u)) * w + bx + static_cast<std::size_t>(v)] = 0.0;
          }
        }
      }
      const Tensor occluded_logits = target.logits(dct::idct2_blockwise(masked));
      report.values[static_cast<std::size_t>(z)] +=
          std::abs(base_logits[static_cast<std::size_t>(c)] - occluded_logits[static_cast<std::size_t>(c)]);
    }
  }
  for (double& v : report.values) v /= static_cast<double>(n);
  return report;
}

HeatmapGrid robustness_heatmap(std::span<const attacks::TargetModel> targets,
                               std::span<const dct::FrequencyMask> attack_masks,
                               std::span<const std::string> mask_labels, const data::Dataset& dataset,
                               const attacks::AttackConfig& base, int sample_limit) {
  if (targets.empty() || attack_masks.empty()) throw std::invalid_argument("heatmap: empty axis");
  if (mask_labels.size() != attack_masks.size()) throw std::invalid_argument("heatmap: label count mismatch");
  HeatmapGrid grid;
  for (const auto& label : mask_labels) grid.col_labels.push_back(label);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    grid.row_labels.push_back(targets[i].id.empty() ? "model" + std::to_string(i) : targets[i].id);
    const bool present = targets[i].model != nullptr;
    grid.present.push_back(present ? 1 : 0);
    for (std::size_t j = 0; j < attack_masks.size(); ++j) {
      if (!present) {
        grid.cells.push_back(std::nan(""));
        continue;
      }
      attacks::AttackConfig cfg = base;
      cfg.constraint = attacks::MaskConstraint{attack_masks[j]};
      grid.cells.push_back(attacks::accuracy_under_attack(targets[i], dataset, cfg, sample_limit));
    }
  }
  return grid;
}

std::vector<std::string> spectrum_csv_header(const SpectrumReport& report) {
  if (report.labels.empty()) return {"zigzag_index", "value", "n"};
  return {"band", "value", "n"};
}

std::vector<std::vector<std::string>> spectrum_csv_rows(const SpectrumReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    const std::string key = report.labels.empty() ? std::to_string(i) : report.labels[i];
    rows.push_back({key, io::format_double(report.values[i]), std::to_string(report.samples)});
  }
  return rows;
}

std::vector<std::string> heatmap_csv_header(const HeatmapGrid& grid) {
  std::vector<std::string> header = {"model"};
  for (const auto& label : grid.col_labels) header.push_back(label);
  return header;
}

std::vector<std::vector<std::string>> heatmap_csv_rows(const HeatmapGrid& grid) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < grid.row_labels.size(); ++i) {
    std::vector<std::string> row = {grid.row_labels[i]};
    for (std::size_t j = 0; j < grid.col_labels.size(); ++j) {
      row.push_back(grid.row_present(i) ? io::format_double(grid.at(i, j)) : "absent");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fadv::analysis
