#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fadv/attacks.hpp"
#include "fadv/checkpoint.hpp"
#include "fadv/data.hpp"
#include "fadv/dct.hpp"
#include "fadv/nn.hpp"

namespace fadv::training {

struct LrSchedule {
  double initial = 0.05;
  std::vector<int> decay_epochs;  // 0-based epochs at which lr multiplies by factor
  double factor = 0.1;

  double at(int epoch) const;
};

struct StandardRegime {};

/// Every batch is replaced by the inner maximizer's output before the
/// parameter step.
struct AdversarialRegime {
  attacks::AttackConfig attack;
};

/// Every sample gets a fresh drop mask per presentation: coefficients outside
/// `band` are kept, those inside are independently zeroed with probability p.
/// Evaluation stays on clean inputs.
struct FreqDropRegime {
  dct::Band band{0, 63};
  double p = 0.0;
};

using Regime = std::variant<StandardRegime, AdversarialRegime, FreqDropRegime>;

struct TrainConfig {
  int epochs = 20;
  LrSchedule lr;
  double momentum = 0.9;
  int batch_size = 64;
  std::uint64_t seed = 1;
  Regime regime = StandardRegime{};
  int eval_every = 1;             // epochs between TrainLog rows (last epoch always logged)
  int eval_attack_samples = 256;  // robust-accuracy subsample for adversarial runs

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double clean_acc = 0.0;
  double adv_acc = -1.0;  // negative when the regime has no attack
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

struct TrainOutcome {
  nn::Checkpoint checkpoint;
  TrainLog log;
};

/// Trains `model` in place. Randomness is split per purpose (init happened at
/// the caller, shuffle, drop masks, attack init), so regimes that skip a
/// consumer leave the other streams untouched; with epsilon = 0 the
/// adversarial regime reproduces standard training bit for bit.
TrainOutcome train(nn::Model& model, const data::Dataset& train_set, const data::Dataset& test_set,
                   const data::Normalization& norm, const TrainConfig& cfg);

/// Builds, He-initializes (from the config seed) and trains a fresh model.
TrainOutcome train_from_scratch(const nn::ModelConfig& model_cfg, const data::Dataset& train_set,
                                const data::Dataset& test_set, const data::Normalization& norm,
                                const TrainConfig& cfg);

struct DropGridCell {
  dct::Band band;
  double p = 0.0;
  double clean_acc = -1.0;
  std::string error;  // empty on success
};

struct DropGrid {
  std::vector<dct::Band> bands;
  std::vector<double> ps;
  std::vector<DropGridCell> cells;  // band-major

  const DropGridCell& at(std::size_t band_idx, std::size_t p_idx) const;
};

/// Trains one model per (band, p) over the 4-band partition. A failed cell
/// records its error and the grid carries on.
DropGrid drop_rate_grid(const nn::ModelConfig& model_cfg, const data::Dataset& train_set,
                        const data::Dataset& test_set, const data::Normalization& norm,
                        const std::vector<double>& ps, const TrainConfig& base);

std::vector<std::vector<std::string>> train_log_rows(const TrainLog& log);
const std::vector<std::string>& train_log_header();

}  // namespace fadv::training
