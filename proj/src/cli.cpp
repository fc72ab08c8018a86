#include "fadv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "fadv/analysis.hpp"
#include "fadv/attacks.hpp"
#include "fadv/checkpoint.hpp"
#include "fadv/config.hpp"
#include "fadv/data.hpp"
#include "fadv/io.hpp"
#include "fadv/rng.hpp"
#include "fadv/training.hpp"

namespace fadv::cli {
namespace {

namespace fs = std::filesystem;

struct MissingCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects everything a command writes and closes with a manifest listing it.
struct Emitter {
  fs::path dir;
  io::RunManifest manifest;

  Emitter(const ExperimentConfig& cfg) : dir(cfg.out_dir) {
    fs::create_directories(dir);
    manifest.config_hash = cfg.config_hash;
    manifest.version = io::kToolkitVersion;
    manifest.seed = cfg.seed;
    manifest.started = io::iso8601_now();
  }

  fs::path csv(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    fs::path p = dir / name;
    io::emit_csv(p, header, rows);
    manifest.files.push_back(name);
    std::cout << "wrote " << p.string() << "\n";
    return p;
  }

  fs::path pgm(const std::string& name, std::span<const double> values64, bool equalize) {
    fs::path p = dir / name;
    io::emit_pgm(p, values64, equalize);
    manifest.files.push_back(name);
    std::cout << "wrote " << p.string() << "\n";
    return p;
  }

  void track(const std::string& name) {
    manifest.files.push_back(name);
    std::cout << "wrote " << (dir / name).string() << "\n";
  }

  void finish() {
    manifest.finished = io::iso8601_now();
    io::write_manifest(dir / "manifest.json", manifest);
    std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  }
};

struct Splits {
  data::Dataset train;
  data::Dataset test;
};

/// `seed_override` lets checkpoint-consuming commands regenerate the exact
/// synthetic splits (and hence normalization) the model was trained on.
Splits build_dataset(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed_override = {}) {
  if (cfg.dataset.kind == DatasetConfig::Kind::Cifar10) {
    auto loaded = data::load_cifar10_binary(cfg.dataset.dir);
    return {std::move(loaded.train), std::move(loaded.test)};
  }
  data::SyntheticSpec spec = data::SyntheticSpec::defaults(seed_override.value_or(cfg.seed));
  spec.noise_sigma = cfg.dataset.noise_sigma;
  spec.train_count = cfg.dataset.train_count;
  spec.test_count = cfg.dataset.test_count;
  auto generated = data::generate_synthetic(spec);
  return {std::move(generated.train), std::move(generated.test)};
}

data::Normalization derive_normalization(const ExperimentConfig& cfg, const data::Dataset& train_set) {
  if (cfg.dataset.normalize) return data::compute_normalization(train_set);
  return data::Normalization::identity(static_cast<int>(train_set.image_shape()[0]));
}

struct LoadedModel {
  nn::Checkpoint checkpoint;
  nn::Model model;
  std::string id;
};

LoadedModel load_model(const fs::path& path) {
  if (!fs::exists(path)) throw MissingCheckpoint("missing checkpoint: " + path.string());
  LoadedModel out;
  out.checkpoint = nn::load_checkpoint(path);
  out.model = nn::model_from_checkpoint(out.checkpoint);
  out.id = path.stem().string();
  return out;
}

int cmd_train(const ExperimentConfig& cfg) {
  Splits splits = build_dataset(cfg);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  nn::ModelConfig model_cfg = build_model_config(
      cfg.model, static_cast<int>(splits.train.image_shape()[0]), static_cast<int>(splits.train.image_shape()[1]),
      static_cast<int>(splits.train.image_shape()[2]), splits.train.classes);

  training::TrainOutcome outcome = training::train_from_scratch(model_cfg, splits.train, splits.test, norm, cfg.train);

  Emitter out(cfg);
  nn::save_checkpoint(outcome.checkpoint, out.dir / "checkpoint.bin");
  out.track("checkpoint.bin");
  out.csv("trainlog.csv", training::train_log_header(), training::train_log_rows(outcome.log));
  out.finish();

  const auto& last = outcome.log.epochs.back();
  std::printf("final clean accuracy %.2f%%", last.clean_acc);
  if (last.adv_acc >= 0.0) std::printf(", adversarial %.2f%%", last.adv_acc);
  std::printf("\n");
  return 0;
}

/// Keep set the step constraint confines delta to; everything passes for the
/// unconstrained families.
dct::FrequencyMask constraint_mask(const attacks::Constraint& c) {
  if (const auto* m = std::get_if<attacks::MaskConstraint>(&c)) return m->mask;
  return dct::FrequencyMask::all();
}

int cmd_attack(const ExperimentConfig& cfg, const fs::path& ckpt_path) {
  LoadedModel loaded = load_model(ckpt_path);
  Splits splits = build_dataset(cfg, loaded.checkpoint.seed);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  attacks::TargetModel target = attacks::make_target(loaded.model, norm, loaded.id);

  const std::size_t n = std::min<std::size_t>(splits.test.size(), static_cast<std::size_t>(cfg.analysis.samples));
  const dct::FrequencyMask keep = constraint_mask(cfg.attack.constraint);
  std::mt19937_64 init_rng = make_stream(cfg.seed, Stream::AttackInit);

  std::vector<std::vector<std::string>> rows;
  int successes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = splits.test.items[i];
    attacks::AttackResult r = attacks::run_attack(target, item.pixels, item.label, cfg.attack, &init_rng);
    successes += r.success ? 1 : 0;
    rows.push_back({std::to_string(i), std::to_string(item.label), std::to_string(r.predicted),
                    r.success ? "1" : "0", io::format_double(r.step_losses.back()),
                    io::format_double(linf_norm(r.delta)), io::format_double(l2_norm(r.delta)),
                    io::format_double(dct::out_of_subspace_energy(r.delta, keep))});
  }

  Emitter out(cfg);
  out.csv("attack_results.csv",
          {"sample", "label", "predicted", "success", "final_loss", "delta_linf", "delta_l2", "oos_energy"}, rows);
  out.finish();

  std::printf("attack success %d/%zu (%.2f%%)\n", successes, n, n ? 100.0 * successes / n : 0.0);
  return 0;
}

void emit_spectrum(Emitter& out, const analysis::SpectrumReport& report, const std::string& base_name,
                   bool equalize) {
  out.csv(base_name + ".csv", analysis::spectrum_csv_header(report), analysis::spectrum_csv_rows(report));
  if (report.values.size() == dct::kBlockCoeffs) out.pgm(base_name + ".pgm", report.values, equalize);
}

int cmd_analyze(const std::string& mode, const ExperimentConfig& cfg, const std::vector<fs::path>& ckpt_paths,
                bool equalize) {
  if (mode == "heatmap") {
    // Missing files become absent rows so one lost checkpoint does not sink
    // the whole grid.
    std::vector<LoadedModel> loaded;
    std::vector<attacks::TargetModel> targets(ckpt_paths.size());
    std::vector<std::string> ids(ckpt_paths.size());
    std::optional<std::uint64_t> data_seed;
    for (const auto& p : ckpt_paths) {
      if (fs::exists(p)) {
        loaded.push_back(load_model(p));
        if (!data_seed) data_seed = loaded.back().checkpoint.seed;
      }
    }
    Splits splits = build_dataset(cfg, data_seed);
    data::Normalization norm = derive_normalization(cfg, splits.train);
    std::size_t next = 0;
    for (std::size_t i = 0; i < ckpt_paths.size(); ++i) {
      ids[i] = ckpt_paths[i].stem().string();
      if (fs::exists(ckpt_paths[i]))
        targets[i] = attacks::make_target(loaded[next++].model, norm, ids[i]);
      else
        targets[i] = attacks::TargetModel{nullptr, norm, ids[i]};
    }
    std::vector<dct::FrequencyMask> masks;
    std::vector<std::string> labels;
    for (const auto& text : cfg.analysis.heatmap_masks) {
      masks.push_back(parse_mask(text));
      labels.push_back(text);
    }
    analysis::HeatmapGrid grid =
        analysis::robustness_heatmap(targets, masks, labels, splits.test, cfg.attack, cfg.analysis.samples);
    Emitter out(cfg);
    out.csv("heatmap.csv", analysis::heatmap_csv_header(grid), analysis::heatmap_csv_rows(grid));
    out.finish();
    return 0;
  }

  LoadedModel loaded = load_model(ckpt_paths.front());
  Splits splits = build_dataset(cfg, loaded.checkpoint.seed);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  attacks::TargetModel target = attacks::make_target(loaded.model, norm, loaded.id);
  Emitter out(cfg);

  if (mode == "spectrum") {
    auto report = analysis::perturbation_gradient_spectrum(target, splits.test, cfg.attack, cfg.analysis.samples);
    emit_spectrum(out, report, "spectrum", equalize);
  } else if (mode == "vulnerability") {
    auto report = analysis::vulnerability_scores(target, splits.test, cfg.attack, cfg.analysis.granularity,
                                                 cfg.analysis.samples);
    emit_spectrum(out, report, "vulnerability", equalize);
  } else if (mode == "occlusion") {
    auto report = analysis::occlusion_scores(target, splits.test, cfg.analysis.class_source, cfg.analysis.samples);
    emit_spectrum(out, report, "occlusion", equalize);
  } else {
    throw ConfigError("unknown analyze mode '" + mode + "'");
  }
  out.finish();
  return 0;
}

/// One adversarially trained model per lambda; adv_acc is measured under a
/// fixed low-frequency reference attack so the rows are comparable.
int cmd_sweep_lambda(const ExperimentConfig& cfg) {
  Splits splits = build_dataset(cfg);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  nn::ModelConfig model_cfg = build_model_config(
      cfg.model, static_cast<int>(splits.train.image_shape()[0]), static_cast<int>(splits.train.image_shape()[1]),
      static_cast<int>(splits.train.image_shape()[2]), splits.train.classes);

  attacks::AttackConfig lf_attack = cfg.attack;
  lf_attack.norm = attacks::Norm::LInf;
  lf_attack.constraint = attacks::MaskConstraint{dct::FrequencyMask::from_band(dct::kLowHalf)};

  const int n = cfg.analysis.samples;
  std::vector<std::vector<std::string>> rows;
  for (double lam : cfg.sweep.lambda_values) {
    attacks::AttackConfig train_attack = cfg.attack;
    train_attack.norm = attacks::Norm::LInf;
    train_attack.constraint = attacks::LambdaMixConstraint{lam};
    training::TrainConfig tc = cfg.train;
    tc.regime = training::AdversarialRegime{train_attack};
    training::TrainOutcome outcome = training::train_from_scratch(model_cfg, splits.train, splits.test, norm, tc);
    nn::Model model = nn::model_from_checkpoint(outcome.checkpoint);
    attacks::TargetModel target = attacks::make_target(model, norm, "lambda=" + io::format_double(lam));
    double adv = attacks::accuracy_under_attack(target, splits.test, lf_attack, n);
    rows.push_back({io::format_double(lam), io::format_double(outcome.log.epochs.back().clean_acc),
                    io::format_double(adv)});
  }
  Emitter out(cfg);
  out.csv("lambda_sweep.csv", {"lambda", "clean_acc", "adv_acc"}, rows);
  out.finish();
  return 0;
}

int cmd_sweep_drop(const ExperimentConfig& cfg) {
  Splits splits = build_dataset(cfg);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  nn::ModelConfig model_cfg = build_model_config(
      cfg.model, static_cast<int>(splits.train.image_shape()[0]), static_cast<int>(splits.train.image_shape()[1]),
      static_cast<int>(splits.train.image_shape()[2]), splits.train.classes);

  training::DropGrid grid =
      training::drop_rate_grid(model_cfg, splits.train, splits.test, norm, cfg.sweep.drop_p_values, cfg.train);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t b = 0; b < grid.bands.size(); ++b) {
    for (std::size_t p = 0; p < grid.ps.size(); ++p) {
      const auto& cell = grid.at(b, p);
      rows.push_back({cell.band.to_string(), io::format_double(cell.p),
                      cell.error.empty() ? io::format_double(cell.clean_acc) : "", cell.error});
    }
  }
  Emitter out(cfg);
  out.csv("drop_sweep.csv", {"band", "p", "clean_acc", "error"}, rows);
  out.finish();
  return 0;
}

int cmd_sweep_eta(const ExperimentConfig& cfg, const fs::path& ckpt_path) {
  LoadedModel loaded = load_model(ckpt_path);
  Splits splits = build_dataset(cfg, loaded.checkpoint.seed);
  data::Normalization norm = derive_normalization(cfg, splits.train);
  attacks::TargetModel target = attacks::make_target(loaded.model, norm, loaded.id);

  const int n = cfg.analysis.samples;
  int bands = 4;
  if (const auto* be = std::get_if<attacks::BandEpsilonConstraint>(&cfg.attack.constraint)) bands = be->bands;

  std::vector<std::vector<std::string>> rows;
  for (bool reversed : {false, true}) {
    attacks::AttackConfig a = cfg.attack;
    a.norm = attacks::Norm::LInf;
    a.constraint = attacks::BandEpsilonConstraint{bands, reversed};
    double adv = attacks::accuracy_under_attack(target, splits.test, a, n);
    std::string etas;
    for (double eta : attacks::unequal_epsilon_schedule(bands, a.epsilon, reversed)) {
      if (!etas.empty()) etas += " ";
      etas += io::format_double(eta);
    }
    rows.push_back({reversed ? "reversed" : "normal", etas, io::format_double(adv)});
  }
  Emitter out(cfg);
  out.csv("eta_sweep.csv", {"variant", "etas", "adv_acc"}, rows);
  out.finish();
  return 0;
}

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file")->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--out", opts.out_dir, "override the output directory");
}

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg = parse_config(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
  }
  if (!opts.out_dir.empty()) cfg.out_dir = fs::path(opts.out_dir);
  return cfg;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"frequency-constrained attacks, defenses and analyses for small image classifiers"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and save its checkpoint");
  add_common(train_cmd, train_opts);

  CommonOpts attack_opts;
  std::string attack_ckpt;
  CLI::App* attack_cmd = app.add_subcommand("attack", "run the configured attack over test samples");
  add_common(attack_cmd, attack_opts);
  attack_cmd->add_option("--checkpoint", attack_ckpt, "model checkpoint")->required();

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "frequency importance reports");
  analyze_cmd->require_subcommand(1);
  struct AnalyzeMode {
    CommonOpts opts;
    std::vector<std::string> checkpoints;
    bool equalize = false;
  };
  std::map<std::string, AnalyzeMode> analyze_modes;
  for (const char* mode : {"spectrum", "vulnerability", "occlusion", "heatmap"}) {
    AnalyzeMode& m = analyze_modes[mode];
    CLI::App* sub = analyze_cmd->add_subcommand(mode);
    add_common(sub, m.opts);
    auto* ckpt_opt = sub->add_option("--checkpoint", m.checkpoints, "model checkpoint (repeatable for heatmap)");
    ckpt_opt->required();
    sub->add_flag("--equalize", m.equalize, "rank-equalize PGM output");
  }

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "parameter sweeps");
  sweep_cmd->require_subcommand(1);
  struct SweepMode {
    CommonOpts opts;
    std::string checkpoint;
  };
  std::map<std::string, SweepMode> sweep_modes;
  for (const char* mode : {"lambda", "drop", "eta"}) {
    SweepMode& m = sweep_modes[mode];
    CLI::App* sub = sweep_cmd->add_subcommand(mode);
    add_common(sub, m.opts);
    if (std::string(mode) == "eta")
      sub->add_option("--checkpoint", m.checkpoint, "model checkpoint")->required();
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(load_config(train_opts));
    if (attack_cmd->parsed()) return cmd_attack(load_config(attack_opts), attack_ckpt);
    if (analyze_cmd->parsed()) {
      for (auto& [mode, m] : analyze_modes) {
        CLI::App* sub = analyze_cmd->get_subcommand(mode);
        if (!sub->parsed()) continue;
        if (mode != "heatmap" && m.checkpoints.size() != 1)
          throw ConfigError("analyze " + mode + " takes exactly one --checkpoint");
        std::vector<fs::path> paths(m.checkpoints.begin(), m.checkpoints.end());
        return cmd_analyze(mode, load_config(m.opts), paths, m.equalize);
      }
    }
    if (sweep_cmd->parsed()) {
      for (auto& [mode, m] : sweep_modes) {
        CLI::App* sub = sweep_cmd->get_subcommand(mode);
        if (!sub->parsed()) continue;
        ExperimentConfig cfg = load_config(m.opts);
        if (mode == "lambda") return cmd_sweep_lambda(cfg);
        if (mode == "drop") return cmd_sweep_drop(cfg);
        return cmd_sweep_eta(cfg, m.checkpoint);
      }
    }
    throw ConfigError("no subcommand selected");
  } catch (const MissingCheckpoint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fadv::cli
