#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "fadv/analysis.hpp"
#include "fadv/attacks.hpp"
#include "fadv/checkpoint.hpp"
#include "fadv/data.hpp"
#include "fadv/dct.hpp"
#include "fadv/nn.hpp"
#include "fadv/rng.hpp"
#include "fadv/tensor.hpp"
#include "fadv/training.hpp"

using namespace fadv;
using analysis::ClassSource;
using analysis::Granularity;
using analysis::HeatmapGrid;
using analysis::SpectrumReport;
using attacks::AttackConfig;
using attacks::MaskConstraint;
using attacks::Norm;
using attacks::TargetModel;

namespace {

constexpr double kEps = 8.0 / 255.0;
constexpr double kAlpha = 2.0 / 255.0;

AttackConfig band_attack(int steps = 10) {
  AttackConfig cfg;
  cfg.epsilon = kEps;
  cfg.alpha = kAlpha;
  cfg.steps = steps;
  return cfg;
}

Tensor wave_input(int h, int w, std::uint64_t seed) {
  Tensor x({1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  auto rng = make_stream(seed, Stream::Synthetic);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
  return x;
}

data::Dataset tiny_set(std::vector<Tensor> images, std::vector<int> labels, int classes) {
  data::Dataset ds;
  ds.classes = classes;
  for (std::size_t i = 0; i < images.size(); ++i) ds.items.push_back({std::move(images[i]), labels[i]});
  return ds;
}

/// Flatten + Dense over (1, 8, 8) with a hand-set weight matrix. The bias on
/// row 0 keeps that logit on top, so MaxLogit gradients equal row 0 exactly.
struct LinearModel {
  nn::Model model;
  data::Normalization norm = data::Normalization::identity(1);

  explicit LinearModel(const std::vector<std::vector<double>>& rows) : model(build(rows)) {}

  static nn::Model build(const std::vector<std::vector<double>>& rows) {
    nn::ModelConfig cfg = nn::ModelConfig::mlp(1, 8, 8, {}, static_cast<int>(rows.size()));
    nn::Model m = nn::Model::build(cfg);
    const auto& entry = m.plan()[1];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      REQUIRE(rows[r].size() == 64);
      for (std::size_t c = 0; c < 64; ++c) m.params()[entry.param_offset + r * 64 + c] = rows[r][c];
    }
    m.params()[entry.param_offset + rows.size() * 64] = 5.0;
    return m;
  }

  TargetModel target() const { return attacks::make_target(model, norm, "linear"); }
};

/// All-zero parameters: logits are identically zero, so the prediction is a
/// constant class and every gradient vanishes.
struct FlatModel {
  nn::Model model;

  explicit FlatModel(int h = 32, int w = 32) : model(nn::Model::build(nn::ModelConfig::mlp(1, h, w, {16}, 4))) {}

  TargetModel target() const { return attacks::make_target(model, data::Normalization::identity(1), "flat"); }
};

/// Trained on the low-amplitude synthetic set: class templates sit close
/// enough to the decision boundary that single-frequency attacks inside the
/// informative band succeed while nuisance-band attacks stay harmless.
struct TrainedFixture {
  data::SyntheticSpec spec;
  data::SyntheticData ds;
  data::Normalization norm;
  nn::Model model;

  TrainedFixture() : spec(data::SyntheticSpec::defaults(21, 0.06)) {
    spec.train_count = 300;
    spec.test_count = 80;
    ds = data::generate_synthetic(spec);
    norm = data::compute_normalization(ds.train);
    training::TrainConfig tc;
    tc.epochs = 8;
    tc.batch_size = 32;
    tc.seed = 21;
    auto outcome =
        training::train_from_scratch(nn::ModelConfig::mlp(1, 32, 32, {32}, 4), ds.train, ds.test, norm, tc);
    model = nn::model_from_checkpoint(outcome.checkpoint);
  }

  TargetModel target() const { return attacks::make_target(model, norm, "trained"); }
};

const TrainedFixture& trained() {
  static TrainedFixture f;
  return f;
}

}  // namespace

TEST_CASE("equalize collapses an all-equal vector to one half") {
  const std::vector<double> same = {7.0, 7.0, 7.0, 7.0};
  for (double v : analysis::histogram_equalize(same)) CHECK(v == 0.5);
  CHECK(analysis::histogram_equalize(std::vector<double>{42.0}) == std::vector<double>{0.5});
}

TEST_CASE("equalize spreads distinct values evenly and keeps their order") {
  const std::vector<double> inc = {-3.0, 0.1, 0.2, 5.0, 9.0};
  const std::vector<double> out = analysis::histogram_equalize(inc);
  for (std::size_t i = 0; i < inc.size(); ++i) CHECK(out[i] == doctest::Approx(i / 4.0).epsilon(1e-12));

  std::vector<double> noisy(33);
  auto rng = make_stream(9, Stream::Synthetic);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (double& v : noisy) v = u(rng);
  const std::vector<double> eq = analysis::histogram_equalize(noisy);
  for (std::size_t a = 0; a < noisy.size(); ++a) {
    CHECK(eq[a] >= 0.0);
    CHECK(eq[a] <= 1.0);
    for (std::size_t b = 0; b < noisy.size(); ++b) {
      if (noisy[a] < noisy[b]) CHECK(eq[a] < eq[b]);
    }
  }
}

TEST_CASE("equalize gives tied values their mean rank") {
  const std::vector<double> tied = {3.0, 1.0, 3.0, 5.0};
  const std::vector<double> out = analysis::histogram_equalize(tied);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[3] == 1.0);

  CHECK_THROWS_WITH_AS(analysis::histogram_equalize(std::vector<double>{}), doctest::Contains("empty"),
                       std::invalid_argument);
}

TEST_CASE("gradient spectrum of a constant-output model is identically zero") {
  FlatModel flat(16, 16);
  data::Dataset ds = tiny_set({wave_input(16, 16, 1), wave_input(16, 16, 2)}, {0, 1}, 4);
  const SpectrumReport rep = analysis::perturbation_gradient_spectrum(flat.target(), ds, band_attack(3));
  CHECK(rep.metric == "perturbation_gradient_spectrum");
  CHECK(rep.model_id == "flat");
  CHECK(rep.samples == 2);
  CHECK(rep.labels.empty());
  REQUIRE(rep.values.size() == 64);
  for (double v : rep.values) CHECK(v == 0.0);
}

TEST_CASE("gradient spectrum of a linear model reads off the top row's transform") {
  std::vector<std::vector<double>> rows(4, std::vector<double>(64, 0.0));
  auto rng = make_stream(11, Stream::Synthetic);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (double& w : rows[0]) w = u(rng);
  LinearModel lin(rows);

  Tensor w_img({1, 8, 8});
  for (std::size_t i = 0; i < 64; ++i) w_img[i] = rows[0][i];
  const Tensor coeffs = dct::dct2_blockwise(w_img);
  const auto& zz = dct::zigzag();

  data::Dataset ds = tiny_set({wave_input(8, 8, 3), wave_input(8, 8, 4), wave_input(8, 8, 5)}, {0, 0, 0}, 4);
  const SpectrumReport rep = analysis::perturbation_gradient_spectrum(lin.target(), ds, band_attack(2));
  REQUIRE(rep.values.size() == 64);
  for (int z = 0; z < 64; ++z) {
    auto [u0, v0] = zz.to_coord(z);
    const double expect = std::abs(coeffs[static_cast<std::size_t>(u0) * 8 + static_cast<std::size_t>(v0)]);
    CHECK(rep.values[static_cast<std::size_t>(z)] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("gradient spectrum concentrates on the informative band for the trained model") {
  const TrainedFixture& f = trained();
  const SpectrumReport rep = analysis::perturbation_gradient_spectrum(f.target(), f.ds.test, band_attack(), 40);
  REQUIRE(rep.values.size() == 64);

  std::vector<int> order(64);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return rep.values[a] > rep.values[b]; });
  int informative_hits = 0;
  for (int i = 0; i < 8; ++i) {
    if (order[i] >= 1 && order[i] <= 8) ++informative_hits;
  }
  CHECK(informative_hits >= 6);
  CHECK(order[0] >= 1);
  CHECK(order[0] <= 8);
}

TEST_CASE("band vulnerability equals a direct per-band attack sweep") {
  const TrainedFixture& f = trained();
  const AttackConfig base = band_attack();
  const SpectrumReport rep = analysis::vulnerability_scores(f.target(), f.ds.test, base, Granularity::Band4, 24);
  CHECK(rep.metric == "vulnerability");
  CHECK(rep.samples == 24);
  const std::vector<std::string> want = {"b0-15", "b16-31", "b32-47", "b48-63"};
  CHECK(rep.labels == want);

  const std::vector<dct::Band> bands = dct::band_partition(4);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    AttackConfig cfg = base;
    cfg.constraint = MaskConstraint{dct::FrequencyMask::from_band(bands[i])};
    const double direct = attacks::accuracy_under_attack(f.target(), f.ds.test, cfg, 24);
    CHECK(rep.values[i] == direct);
  }
}

TEST_CASE("per-frequency vulnerability dips inside the informative band") {
  const TrainedFixture& f = trained();
  const SpectrumReport rep =
      analysis::vulnerability_scores(f.target(), f.ds.test, band_attack(), Granularity::PerFrequency, 40);
  REQUIRE(rep.values.size() == 64);
  CHECK(rep.labels.front() == "b0-0");
  CHECK(rep.labels.back() == "b63-63");

  const auto it = std::min_element(rep.values.begin(), rep.values.end());
  const int argmin = static_cast<int>(it - rep.values.begin());
  CHECK(argmin >= 1);
  CHECK(argmin <= 8);
  for (int z = f.spec.nuisance.lo; z <= f.spec.nuisance.hi; ++z) {
    CHECK(rep.values[static_cast<std::size_t>(z)] >= *it + 30.0);
  }
}

TEST_CASE("a constant-output model scores chance under every band attack") {
  FlatModel flat;
  const data::SyntheticData& ds = trained().ds;  // test split is label-balanced
  const SpectrumReport rep =
      analysis::vulnerability_scores(flat.target(), ds.test, band_attack(), Granularity::Band16, 80);
  REQUIRE(rep.values.size() == 16);
  for (double v : rep.values) CHECK(v == 25.0);
  CHECK(attacks::clean_accuracy(flat.target(), ds.test, 80) == 25.0);
}

TEST_CASE("occluding a frequency the image does not contain moves no logit") {
  Tensor flat_img({1, 16, 16});
  for (std::size_t i = 0; i < flat_img.size(); ++i) flat_img[i] = 0.4;
  data::Dataset ds = tiny_set({flat_img}, {0}, 4);

  nn::ModelConfig cfg = nn::ModelConfig::mlp(1, 16, 16, {12}, 4);
  auto rng = make_stream(5, Stream::ModelInit);
  nn::Model model = nn::Model::init(cfg, rng);
  const TargetModel target = attacks::make_target(model, data::Normalization::identity(1), "init");

  const SpectrumReport rep = analysis::occlusion_scores(target, ds);
  CHECK(rep.metric == "occlusion");
  CHECK(rep.samples == 1);
  CHECK(rep.values[0] > 1e-6);  // the DC carries the whole image
  for (int z = 1; z < 64; ++z) CHECK(rep.values[static_cast<std::size_t>(z)] < 1e-12);
}

TEST_CASE("occlusion scores vanish exactly on a constant-output model") {
  FlatModel flat(16, 16);
  data::Dataset ds = tiny_set({wave_input(16, 16, 6), wave_input(16, 16, 7)}, {2, 3}, 4);
  const SpectrumReport rep = analysis::occlusion_scores(flat.target(), ds);
  for (double v : rep.values) CHECK(v == 0.0);
}

TEST_CASE("occlusion on a one-block linear model follows the closed form") {
  std::vector<std::vector<double>> rows(4, std::vector<double>(64, 0.0));
  auto rng = make_stream(13, Stream::Synthetic);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& w : rows[0]) w = u(rng);
  LinearModel lin(rows);

  const Tensor x = wave_input(8, 8, 14);
  data::Dataset ds = tiny_set({x}, {0}, 4);

  Tensor w_img({1, 8, 8});
  for (std::size_t i = 0; i < 64; ++i) w_img[i] = rows[0][i];
  const Tensor w_coeffs = dct::dct2_blockwise(w_img);
  const Tensor x_coeffs = dct::dct2_blockwise(x);
  const auto& zz = dct::zigzag();

  const SpectrumReport rep = analysis::occlusion_scores(lin.target(), ds, ClassSource::TrueLabel);
  for (int z = 0; z < 64; ++z) {
    auto [u0, v0] = zz.to_coord(z);
    const std::size_t at = static_cast<std::size_t>(u0) * 8 + static_cast<std::size_t>(v0);
    const double expect = std::abs(w_coeffs[at] * x_coeffs[at]);
    CHECK(rep.values[static_cast<std::size_t>(z)] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("occlusion class source switches between true label and prediction") {
  // Row 0 (the true label's logit) is all zeros; row 1 carries weight and a
  // winning bias, so the prediction is class 1 on every input.
  std::vector<std::vector<double>> rows(4, std::vector<double>(64, 0.0));
  auto rng = make_stream(15, Stream::Synthetic);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& w : rows[1]) w = u(rng);
  LinearModel lin(rows);
  const auto& entry = lin.model.plan()[1];
  lin.model.params()[entry.param_offset + 4 * 64 + 0] = 0.0;
  lin.model.params()[entry.param_offset + 4 * 64 + 1] = 5.0;

  data::Dataset ds = tiny_set({wave_input(8, 8, 16)}, {0}, 4);
  REQUIRE(lin.target().predict(ds.items[0].pixels) == 1);

  const SpectrumReport by_label = analysis::occlusion_scores(lin.target(), ds, ClassSource::TrueLabel);
  const SpectrumReport by_pred = analysis::occlusion_scores(lin.target(), ds, ClassSource::Predicted);
  for (double v : by_label.values) CHECK(v < 1e-12);
  CHECK(*std::max_element(by_pred.values.begin(), by_pred.values.end()) > 1e-3);

  data::Dataset bad = tiny_set({wave_input(8, 8, 17)}, {7}, 8);
  CHECK_THROWS_WITH_AS(analysis::occlusion_scores(lin.target(), bad, ClassSource::TrueLabel),
                       doctest::Contains("label out of range"), std::invalid_argument);
}

TEST_CASE("heatmap cells replay the vulnerability sweep for each model row") {
  const TrainedFixture& f = trained();
  nn::ModelConfig cfg = nn::ModelConfig::mlp(1, 32, 32, {12}, 4);
  auto rng = make_stream(8, Stream::ModelInit);
  nn::Model other = nn::Model::init(cfg, rng);

  const std::vector<TargetModel> targets = {f.target(), attacks::make_target(other, f.norm, "init")};
  std::vector<dct::FrequencyMask> masks;
  std::vector<std::string> labels;
  for (const dct::Band& band : dct::band_partition(4)) {
    masks.push_back(dct::FrequencyMask::from_band(band));
    labels.push_back(band.to_string());
  }

  const AttackConfig base = band_attack(5);
  const HeatmapGrid grid = analysis::robustness_heatmap(targets, masks, labels, f.ds.test, base, 20);
  REQUIRE(grid.row_labels.size() == 2);
  REQUIRE(grid.col_labels.size() == 4);
  CHECK(grid.row_labels[0] == "trained");
  CHECK(grid.row_labels[1] == "init");
  CHECK(grid.cells.size() == 8);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(grid.row_present(i));
    for (std::size_t j = 0; j < masks.size(); ++j) {
      AttackConfig cfg_j = base;
      cfg_j.constraint = MaskConstraint{masks[j]};
      const double direct = attacks::accuracy_under_attack(targets[i], f.ds.test, cfg_j, 20);
      CHECK(grid.at(i, j) == direct);
    }
  }
}

TEST_CASE("a null model marks its row absent end to end") {
  const TrainedFixture& f = trained();
  TargetModel missing;
  missing.id = "gone";
  const std::vector<TargetModel> targets = {f.target(), missing};
  const std::vector<dct::FrequencyMask> masks = {dct::FrequencyMask::from_band(dct::kLowHalf),
                                                 dct::FrequencyMask::from_band(dct::kHighHalf)};
  const std::vector<std::string> labels = {"low", "high"};

  const HeatmapGrid grid = analysis::robustness_heatmap(targets, masks, labels, f.ds.test, band_attack(3), 10);
  CHECK(grid.row_present(0));
  CHECK_FALSE(grid.row_present(1));
  CHECK(std::isnan(grid.at(1, 0)));
  CHECK(std::isnan(grid.at(1, 1)));
  CHECK(!std::isnan(grid.at(0, 0)));

  const auto header = analysis::heatmap_csv_header(grid);
  const std::vector<std::string> want_header = {"model", "low", "high"};
  CHECK(header == want_header);
  const auto rows = analysis::heatmap_csv_rows(grid);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "gone");
  CHECK(rows[1][1] == "absent");
  CHECK(rows[1][2] == "absent");
  CHECK(rows[0][1] != "absent");

  CHECK_THROWS_AS(grid.at(2, 0), std::out_of_range);
  CHECK_THROWS_AS(grid.at(0, 2), std::out_of_range);
  CHECK_THROWS_AS(grid.row_present(5), std::out_of_range);
}

TEST_CASE("heatmap rejects empty axes and mismatched labels") {
  const TrainedFixture& f = trained();
  const std::vector<TargetModel> targets = {f.target()};
  const std::vector<dct::FrequencyMask> masks = {dct::FrequencyMask::all()};
  const std::vector<std::string> one = {"all"};
  const std::vector<std::string> two = {"all", "extra"};

  CHECK_THROWS_WITH_AS(analysis::robustness_heatmap({}, masks, one, f.ds.test, band_attack()),
                       doctest::Contains("empty axis"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(analysis::robustness_heatmap(targets, {}, {}, f.ds.test, band_attack()),
                       doctest::Contains("empty axis"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(analysis::robustness_heatmap(targets, masks, two, f.ds.test, band_attack()),
                       doctest::Contains("label count mismatch"), std::invalid_argument);
}

TEST_CASE("spectrum csv keys rows by zigzag index or band label") {
  FlatModel flat(16, 16);
  data::Dataset ds = tiny_set({wave_input(16, 16, 20)}, {0}, 4);

  const SpectrumReport occ = analysis::occlusion_scores(flat.target(), ds);
  const std::vector<std::string> freq_header = {"zigzag_index", "value", "n"};
  CHECK(analysis::spectrum_csv_header(occ) == freq_header);
  const auto occ_rows = analysis::spectrum_csv_rows(occ);
  REQUIRE(occ_rows.size() == 64);
  CHECK(occ_rows[0][0] == "0");
  CHECK(occ_rows[63][0] == "63");
  CHECK(occ_rows[5][2] == "1");

  const SpectrumReport vuln =
      analysis::vulnerability_scores(flat.target(), ds, band_attack(2), Granularity::Band4);
  const std::vector<std::string> band_header = {"band", "value", "n"};
  CHECK(analysis::spectrum_csv_header(vuln) == band_header);
  const auto vuln_rows = analysis::spectrum_csv_rows(vuln);
  REQUIRE(vuln_rows.size() == 4);
  CHECK(vuln_rows[0][0] == "b0-15");
  // Values round-trip through the text form.
  for (std::size_t i = 0; i < vuln_rows.size(); ++i) {
    CHECK(std::strtod(vuln_rows[i][1].c_str(), nullptr) == vuln.values[i]);
  }
}

TEST_CASE("analysis sweeps are bit-identical across repeated runs") {
  const TrainedFixture& f = trained();
  AttackConfig cfg = band_attack(5);
  cfg.random_init = true;

  const SpectrumReport s1 = analysis::perturbation_gradient_spectrum(f.target(), f.ds.test, cfg, 12);
  const SpectrumReport s2 = analysis::perturbation_gradient_spectrum(f.target(), f.ds.test, cfg, 12);
  CHECK(s1.values == s2.values);

  const SpectrumReport v1 = analysis::vulnerability_scores(f.target(), f.ds.test, band_attack(), Granularity::Band4, 16);
  const SpectrumReport v2 = analysis::vulnerability_scores(f.target(), f.ds.test, band_attack(), Granularity::Band4, 16);
  CHECK(v1.values == v2.values);

  const SpectrumReport o1 = analysis::occlusion_scores(f.target(), f.ds.test, ClassSource::TrueLabel, 8);
  const SpectrumReport o2 = analysis::occlusion_scores(f.target(), f.ds.test, ClassSource::TrueLabel, 8);
  CHECK(o1.values == o2.values);
}

TEST_CASE("sample limits clamp to the dataset and negative means all") {
  FlatModel flat(16, 16);
  std::vector<Tensor> images;
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) {
    images.push_back(wave_input(16, 16, 30 + static_cast<std::uint64_t>(i)));
    labels.push_back(i % 4);
  }
  data::Dataset ds = tiny_set(std::move(images), std::move(labels), 4);

  CHECK(analysis::occlusion_scores(flat.target(), ds, ClassSource::TrueLabel, 3).samples == 3);
  CHECK(analysis::occlusion_scores(flat.target(), ds, ClassSource::TrueLabel, -1).samples == 5);
  CHECK(analysis::occlusion_scores(flat.target(), ds, ClassSource::TrueLabel, 100).samples == 5);

  data::Dataset empty;
  empty.classes = 4;
  CHECK_THROWS_WITH_AS(analysis::occlusion_scores(flat.target(), empty), doctest::Contains("empty dataset"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(analysis::vulnerability_scores(flat.target(), empty, band_attack(), Granularity::Band4),
                       doctest::Contains("empty dataset"), std::invalid_argument);
}
