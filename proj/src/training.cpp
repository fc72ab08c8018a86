#include "fadv/training.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fadv/io.hpp"
#include "fadv/rng.hpp"

namespace fadv::training {

namespace {

constexpr double kDivergenceLoss = 1e4;

}  // namespace

double LrSchedule::at(int epoch) const {
  double lr = initial;
  for (int decay : decay_epochs) {
    if (epoch >= decay) lr *= factor;
  }
  return lr;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr.initial > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (lr.factor <= 0.0) throw std::invalid_argument("train: lr decay factor must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum must lie in [0, 1)");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (eval_attack_samples < 1) throw std::invalid_argument("train: eval_attack_samples must be >= 1");
  if (const auto* drop = std::get_if<FreqDropRegime>(&regime)) {
    drop->band.validate();
    if (drop->p < 0.0 || drop->p > 1.0) throw std::invalid_argument("train: drop p must lie in [0, 1]");
  }
  if (const auto* adv = std::get_if<AdversarialRegime>(&regime)) {
    // Epsilon 0 is the degeneracy hook: the attack collapses to a no-op but
    // the rest of the loop must behave identically, so it validates here
    // rather than through AttackConfig.
    if (adv->attack.epsilon < 0.0) throw std::invalid_argument("train: attack epsilon must be >= 0");
    if (adv->attack.epsilon > 0.0) adv->attack.validate();
  }
}

TrainOutcome train(nn::Model& model, const data::Dataset& train_set, const data::Dataset& test_set,
                   const data::Normalization& norm, const TrainConfig& cfg) {
  cfg.validate();
  norm.validate();
  if (train_set.items.empty()) throw std::invalid_argument("train: empty training set");
  if (test_set.items.empty()) throw std::invalid_argument("train: empty test set");
  if (train_set.classes != model.classes()) {
    throw std::invalid_argument("train: dataset has " + std::to_string(train_set.classes) + " classes, model has " +
                                std::to_string(model.classes()));
  }

  const bool ident = norm.is_identity();
  const attacks::TargetModel target = attacks::make_target(model, norm);
  auto drop_rng = make_stream(cfg.seed, Stream::DropMask);
  auto attack_rng = make_stream(cfg.seed, Stream::AttackInit);

  nn::SgdOptimizer opt(cfg.lr.at(0), cfg.momentum);
  TrainOutcome outcome;

  const auto* adv = std::get_if<AdversarialRegime>(&cfg.regime);
  const auto* drop = std::get_if<FreqDropRegime>(&cfg.regime);
  const bool attack_active = adv != nullptr && adv->attack.epsilon > 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    opt.set_lr(cfg.lr.at(epoch));
    auto shuffle_rng = make_stream(cfg.seed, Stream::Shuffle, static_cast<std::uint64_t>(epoch));
    const auto batches = data::epoch_batches(train_set.items.size(), static_cast<std::size_t>(cfg.batch_size),
                                             shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_count = 0;
    for (const auto& indices : batches) {
      std::vector<int> labels;
      Tensor batch = data::gather_batch(train_set, indices, &labels);
      if (adv != nullptr && adv->attack.epsilon > 0.0) {
        const auto shape = model.input_shape();
        const std::size_t sample_size = shape[0] * shape[1] * shape[2];
        for (std::size_t s = 0; s < indices.size(); ++s) {
          Tensor sample(shape);
          std::copy(batch.data() + s * sample_size, batch.data() + (s + 1) * sample_size, sample.data());
          const attacks::AttackResult r =
              attacks::run_attack(target, sample, labels[s], adv->attack, &attack_rng);
          std::copy(r.adversarial.data(), r.adversarial.data() + sample_size, batch.data() + s * sample_size);
        }
      } else if (drop != nullptr) {
        const auto shape = model.input_shape();
        const std::size_t sample_size = shape[0] * shape[1] * shape[2];
        for (std::size_t s = 0; s < indices.size(); ++s) {
          const dct::FrequencyMask mask = dct::make_drop_mask(drop->band, drop->p, drop_rng);
          // An all-keep draw is the identity; skipping it avoids a transform
          // round trip and keeps p = 0 bit-identical to standard training.
          if (mask.all_kept()) continue;
          Tensor sample(shape);
          std::copy(batch.data() + s * sample_size, batch.data() + (s + 1) * sample_size, sample.data());
          const Tensor masked = dct::apply_mask_freq(sample, mask, dct::MaskDomain::Spatial);
          std::copy(masked.data(), masked.data() + sample_size, batch.data() + s * sample_size);
        }
      }
      const double loss = opt.step(model, ident ? batch : data::normalize(batch, norm), labels);
      if (!std::isfinite(loss) || loss > kDivergenceLoss) {
        throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_count) + " (loss " + io::format_double(loss) + ")");
      }
      epoch_loss += loss;
      ++batch_count;
    }

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.loss = epoch_loss / static_cast<double>(batch_count);
      stats.clean_acc = attacks::clean_accuracy(target, test_set);
      if (attack_active) {
        // Evaluation draws from its own stream so the eval cadence cannot
        // shift the training trajectory.
        auto eval_rng = make_stream(cfg.seed, Stream::AttackInit, 0x10000ull + static_cast<std::uint64_t>(epoch));
        stats.adv_acc =
            attacks::accuracy_under_attack(target, test_set, adv->attack, cfg.eval_attack_samples, &eval_rng);
      }
      stats.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
      outcome.log.epochs.push_back(stats);
    }
  }

  outcome.checkpoint = nn::make_checkpoint(model, static_cast<std::uint32_t>(cfg.epochs), cfg.seed);
  return outcome;
}

TrainOutcome train_from_scratch(const nn::ModelConfig& model_cfg, const data::Dataset& train_set,
                                const data::Dataset& test_set, const data::Normalization& norm,
                                const TrainConfig& cfg) {
  auto init_rng = make_stream(cfg.seed, Stream::ModelInit);
  nn::Model model = nn::Model::init(model_cfg, init_rng);
  return train(model, train_set, test_set, norm, cfg);
}

const DropGridCell& DropGrid::at(std::size_t band_idx, std::size_t p_idx) const {
  if (band_idx >= bands.size() || p_idx >= ps.size()) throw std::out_of_range("drop grid: cell out of range");
  return cells[band_idx * ps.size() + p_idx];
}

DropGrid drop_rate_grid(const nn::ModelConfig& model_cfg, const data::Dataset& train_set,
                        const data::Dataset& test_set, const data::Normalization& norm,
                        const std::vector<double>& ps, const TrainConfig& base) {
  if (ps.empty()) throw std::invalid_argument("drop grid: empty p list");
  DropGrid grid;
  grid.bands = dct::band_partition(4);
  grid.ps = ps;
  for (std::size_t b = 0; b < grid.bands.size(); ++b) {
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
      DropGridCell cell;
      cell.band = grid.bands[b];
      cell.p = ps[pi];
      // Common random numbers: every cell shares the base seed, so cells
      // differing only in an inert knob (p = 0 across bands) train the same
      // model and the grid isolates the (band, p) effect.
      TrainConfig cfg = base;
      cfg.regime = FreqDropRegime{grid.bands[b], ps[pi]};
      try {
        const TrainOutcome outcome = train_from_scratch(model_cfg, train_set, test_set, norm, cfg);
        cell.clean_acc = outcome.log.epochs.back().clean_acc;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

const std::vector<std::string>& train_log_header() {
  static const std::vector<std::string> header = {"epoch", "clean_acc", "adv_acc", "loss", "seconds"};
  return header;
}

std::vector<std::vector<std::string>> train_log_rows(const TrainLog& log) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(log.epochs.size());
  for (const EpochStats& s : log.epochs) {
    rows.push_back({std::to_string(s.epoch), io::format_double(s.clean_acc),
                    s.adv_acc < 0.0 ? std::string() : io::format_double(s.adv_acc), io::format_double(s.loss),
                    io::format_double(s.seconds)});
  }
  return rows;
}

}  // namespace fadv::training
