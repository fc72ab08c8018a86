#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "fadv/attacks.hpp"
#include "fadv/checkpoint.hpp"
#include "fadv/data.hpp"
#include "fadv/dct.hpp"
#include "fadv/nn.hpp"
#include "fadv/rng.hpp"
#include "fadv/training.hpp"

using namespace fadv;
using training::AdversarialRegime;
using training::FreqDropRegime;
using training::StandardRegime;
using training::TrainConfig;
using training::TrainOutcome;

namespace {

struct Setup {
  data::SyntheticSpec spec;
  data::SyntheticData ds;
  data::Normalization norm;
  nn::ModelConfig model_cfg;

  Setup() : spec(data::SyntheticSpec::defaults(21, 0.10)), model_cfg(nn::ModelConfig::mlp(1, 32, 32, {32}, 4)) {
    spec.train_count = 300;
    spec.test_count = 80;
    ds = data::generate_synthetic(spec);
    norm = data::compute_normalization(ds.train);
  }
};

const Setup& setup() {
  static Setup s;
  return s;
}

TrainConfig quick_config(int epochs = 6) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  tc.seed = 21;
  return tc;
}

double max_param_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("zero-budget adversarial training reproduces standard training bit for bit") {
  const Setup& s = setup();
  TrainConfig standard = quick_config(3);

  TrainConfig adv = standard;
  attacks::AttackConfig atk;
  atk.epsilon = 0.0;
  atk.constraint = attacks::MaskConstraint{dct::FrequencyMask::from_band(s.spec.informative)};
  adv.regime = AdversarialRegime{atk};

  TrainOutcome a = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, standard);
  TrainOutcome b = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, adv);
  CHECK(max_param_diff(a.checkpoint.params, b.checkpoint.params) == 0.0);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    CHECK(a.log.epochs[i].clean_acc == b.log.epochs[i].clean_acc);
    CHECK(a.log.epochs[i].loss == b.log.epochs[i].loss);
    // No attack ran, so the robust-accuracy column stays unset.
    CHECK(b.log.epochs[i].adv_acc < 0.0);
  }
}

TEST_CASE("zero drop probability reproduces standard training bit for bit") {
  const Setup& s = setup();
  TrainConfig standard = quick_config(3);
  TrainConfig drop = standard;
  drop.regime = FreqDropRegime{{0, 15}, 0.0};

  TrainOutcome a = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, standard);
  TrainOutcome b = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, drop);
  CHECK(max_param_diff(a.checkpoint.params, b.checkpoint.params) == 0.0);
}

TEST_CASE("fixed seeds give identical training logs and different seeds do not") {
  const Setup& s = setup();
  TrainConfig tc = quick_config(4);

  TrainOutcome a = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, tc);
  TrainOutcome b = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, tc);
  CHECK(a.checkpoint.params == b.checkpoint.params);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    // Wall time is the one column outside the determinism contract.
    CHECK(a.log.epochs[i].epoch == b.log.epochs[i].epoch);
    CHECK(a.log.epochs[i].clean_acc == b.log.epochs[i].clean_acc);
    CHECK(a.log.epochs[i].adv_acc == b.log.epochs[i].adv_acc);
    CHECK(a.log.epochs[i].loss == b.log.epochs[i].loss);
    CHECK(a.log.epochs[i].seconds >= 0.0);
  }

  TrainConfig other = tc;
  other.seed = 22;
  TrainOutcome c = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, other);
  CHECK(max_param_diff(a.checkpoint.params, c.checkpoint.params) > 0.0);

  CHECK(a.checkpoint.seed == 21);
  CHECK(a.checkpoint.epochs == 4);
}

TEST_CASE("training reaches full accuracy on the synthetic set") {
  const Setup& s = setup();
  TrainOutcome out = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, quick_config(8));
  CHECK(out.log.epochs.back().clean_acc >= 95.0);
  CHECK(out.log.epochs.back().loss < 0.1);
}

TEST_CASE("exploding learning rates abort with a divergence diagnostic") {
  const Setup& s = setup();
  TrainConfig tc = quick_config(3);
  tc.lr.initial = 1e7;
  CHECK_THROWS_WITH_AS(training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, tc),
                       doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("learning rate schedule applies each decay from its epoch onward") {
  training::LrSchedule lr;
  lr.initial = 0.1;
  lr.decay_epochs = {2, 4};
  lr.factor = 0.1;
  CHECK(lr.at(0) == 0.1);
  CHECK(lr.at(1) == 0.1);
  CHECK(lr.at(2) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(lr.at(3) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(lr.at(4) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(lr.at(9) == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("evaluation cadence logs every k-th epoch plus the last") {
  const Setup& s = setup();
  TrainConfig tc = quick_config(7);
  tc.eval_every = 3;
  TrainOutcome out = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, tc);
  REQUIRE(out.log.epochs.size() == 3);
  CHECK(out.log.epochs[0].epoch == 2);
  CHECK(out.log.epochs[1].epoch == 5);
  CHECK(out.log.epochs[2].epoch == 6);

  const auto header = training::train_log_header();
  const auto rows = training::train_log_rows(out.log);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) CHECK(row.size() == header.size());
}

TEST_CASE("train config validation rejects malformed settings") {
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.lr.initial = 0.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.momentum = 1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.momentum = -0.1;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.eval_every = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  tc.regime = FreqDropRegime{{0, 15}, 1.5};
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  tc = TrainConfig{};
  attacks::AttackConfig atk;
  atk.epsilon = -1.0;
  tc.regime = AdversarialRegime{atk};
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);

  // Zero epsilon is the standard-training degeneracy, not an error.
  tc = TrainConfig{};
  atk.epsilon = 0.0;
  tc.regime = AdversarialRegime{atk};
  CHECK_NOTHROW(tc.validate());
}

TEST_CASE("adversarial training logs robust accuracy per evaluated epoch") {
  const Setup& s = setup();
  TrainConfig tc = quick_config(2);
  attacks::AttackConfig atk;
  atk.epsilon = 8.0 / 255.0;
  atk.alpha = 2.0 / 255.0;
  atk.steps = 4;
  atk.constraint = attacks::MaskConstraint{dct::FrequencyMask::from_band(s.spec.informative)};
  tc.regime = AdversarialRegime{atk};
  tc.eval_attack_samples = 24;

  TrainOutcome out = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, tc);
  for (const auto& row : out.log.epochs) {
    CHECK(row.adv_acc >= 0.0);
    CHECK(row.adv_acc <= 100.0);
    CHECK(row.clean_acc >= 0.0);
    CHECK(row.clean_acc <= 100.0);
  }
}

TEST_CASE("dropping the informative band at full rate destroys the class signal") {
  const Setup& s = setup();

  TrainConfig standard = quick_config();
  TrainOutcome base = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, standard);
  const double base_acc = base.log.epochs.back().clean_acc;
  REQUIRE(base_acc >= 95.0);

  TrainConfig kill = standard;
  kill.regime = FreqDropRegime{s.spec.informative, 1.0};
  TrainOutcome killed = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, kill);
  CHECK(killed.log.epochs.back().clean_acc <= 25.0 + 10.0);

  TrainConfig harmless = standard;
  harmless.regime = FreqDropRegime{s.spec.nuisance, 1.0};
  TrainOutcome unharmed = training::train_from_scratch(s.model_cfg, s.ds.train, s.ds.test, s.norm, harmless);
  CHECK(std::abs(unharmed.log.epochs.back().clean_acc - base_acc) <= 5.0);
}

TEST_CASE("drop rate grid populates all cells and degenerates cleanly at p zero") {
  const Setup& s = setup();
  const std::vector<double> ps = {0.0, 0.5, 1.0};
  // Dropping the whole low band removes the DC term, which normalization then
  // turns into large negative inputs; the default lr diverges on that cell.
  TrainConfig tc = quick_config();
  tc.lr.initial = 0.01;
  training::DropGrid grid = training::drop_rate_grid(s.model_cfg, s.ds.train, s.ds.test, s.norm, ps, tc);

  REQUIRE(grid.bands.size() == 4);
  REQUIRE(grid.ps == ps);
  REQUIRE(grid.cells.size() == 12);
  for (const auto& cell : grid.cells) {
    CHECK(cell.error.empty());
    CHECK(cell.clean_acc >= 0.0);
    CHECK(cell.clean_acc <= 100.0);
  }

  // Shared seeds make p = 0 literally the same run in every band.
  const double p0 = grid.at(0, 0).clean_acc;
  for (std::size_t b = 1; b < 4; ++b) CHECK(grid.at(b, 0).clean_acc == p0);

  // Higher drop rates never help, modulo 2 points of run-to-run noise.
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t pi = 1; pi < ps.size(); ++pi) {
      CHECK(grid.at(b, pi).clean_acc <= grid.at(b, pi - 1).clean_acc + 2.0);
    }
  }

  // The class signal sits inside the first partition band.
  CHECK(grid.at(0, 2).clean_acc <= 25.0 + 10.0);
  CHECK(grid.at(2, 2).clean_acc >= p0 - 5.0);

  CHECK_THROWS_AS(training::drop_rate_grid(s.model_cfg, s.ds.train, s.ds.test, s.norm, {}, tc),
                  std::invalid_argument);
}

TEST_CASE("grid cells record training failures without aborting the sweep") {
  const Setup& s = setup();
  TrainConfig tc = quick_config(2);
  tc.lr.initial = 1e7;  // every cell diverges
  training::DropGrid grid = training::drop_rate_grid(s.model_cfg, s.ds.train, s.ds.test, s.norm, {0.0}, tc);
  REQUIRE(grid.cells.size() == 4);
  for (const auto& cell : grid.cells) {
    CHECK_FALSE(cell.error.empty());
    CHECK(cell.clean_acc == -1.0);
  }
}
