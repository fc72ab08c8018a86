#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fadv/analysis.hpp"
#include "fadv/attacks.hpp"
#include "fadv/data.hpp"
#include "fadv/nn.hpp"
#include "fadv/training.hpp"

namespace fadv::cli {

/// Raised for any malformed experiment config; carries the offending line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  enum class Kind { Synthetic, Cifar10 };
  Kind kind = Kind::Synthetic;
  std::filesystem::path dir;  // cifar10 only
  int train_count = 2000;
  int test_count = 500;
  double noise_sigma = 0.02;
  bool normalize = false;  // true: per-channel stats from the train split
};

struct ModelSpec {
  enum class Kind { Mlp, Cnn };
  Kind kind = Kind::Mlp;
  std::vector<int> hidden = {64};  // mlp
  int conv1 = 8, conv2 = 16, dense_hidden = 64;  // cnn
};

struct AnalysisConfig {
  int samples = 512;
  analysis::Granularity granularity = analysis::Granularity::PerFrequency;
  analysis::ClassSource class_source = analysis::ClassSource::TrueLabel;
  std::vector<std::string> heatmap_masks = {"b0-15", "b16-31", "b32-47", "b48-63"};
};

struct SweepConfig {
  std::vector<double> lambda_values = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> drop_p_values = {0.0, 0.5, 1.0};
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelSpec model;
  training::TrainConfig train;
  attacks::AttackConfig attack;
  AnalysisConfig analysis;
  SweepConfig sweep;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  std::string config_hash;  // order-independent hash of the parsed entries
};

/// Strict flat key=value parser with [section] headers. Unknown sections or
/// keys, duplicate keys, malformed values and unresolvable paths are all
/// ConfigErrors naming the line.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);

/// "8/255" or a plain decimal.
double parse_fraction(const std::string& text);

/// 64-char 0/1 string, "b<lo>-<hi>" band, or comma-separated indices.
dct::FrequencyMask parse_mask(const std::string& text);

nn::ModelConfig build_model_config(const ModelSpec& spec, int channels, int height, int width, int classes);

}  // namespace fadv::cli
