#include "fadv/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fadv::cli {
namespace {

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

double parse_double_strict(const std::string& text, int line_no) {
  const std::string t = trim(text);
  if (t.empty()) fail(line_no, "empty number");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) fail(line_no, "malformed number '" + t + "'");
  return v;
}

long parse_int_strict(const std::string& text, int line_no) {
  const std::string t = trim(text);
  if (t.empty()) fail(line_no, "empty integer");
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) fail(line_no, "malformed integer '" + t + "'");
  return v;
}

bool parse_bool_strict(const std::string& text, int line_no) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  fail(line_no, "expected true or false, got '" + t + "'");
}

std::vector<int> parse_int_list(const std::string& text, int line_no) {
  std::vector<int> out;
  for (const auto& tok : split_commas(text)) out.push_back(static_cast<int>(parse_int_strict(tok, line_no)));
  return out;
}

std::vector<double> parse_double_list(const std::string& text, int line_no) {
  std::vector<double> out;
  for (const auto& tok : split_commas(text)) out.push_back(parse_double_strict(tok, line_no));
  return out;
}

// Constraint pieces accumulated from [attack] keys; merged after the last line.
struct AttackDraft {
  std::string mask;
  std::string lambda;
  std::string bands;
  bool reversed = false;
  int reversed_line = 0;
  int mask_line = 0, lambda_line = 0, bands_line = 0;
};

}  // namespace

double parse_fraction(const std::string& text) {
  const std::string t = trim(text);
  auto slash = t.find('/');
  auto to_double = [&](const std::string& part) {
    const std::string p = trim(part);
    if (p.empty()) throw ConfigError("malformed fraction '" + t + "'");
    char* end = nullptr;
    double v = std::strtod(p.c_str(), &end);
    if (end != p.c_str() + p.size()) throw ConfigError("malformed fraction '" + t + "'");
    return v;
  };
  if (slash == std::string::npos) return to_double(t);
  double num = to_double(t.substr(0, slash));
  double den = to_double(t.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + t + "'");
  return num / den;
}

dct::FrequencyMask parse_mask(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty mask");
  try {
    if (t.size() == 64 && t.find_first_not_of("01") == std::string::npos)
      return dct::FrequencyMask::from_string(t);
    if (t[0] == 'b' && t.find('-') != std::string::npos)
      return dct::FrequencyMask::from_band(dct::Band::parse(t));
    std::vector<int> idx;
    for (const auto& tok : split_commas(t)) {
      if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("malformed mask '" + t + "'");
      idx.push_back(std::stoi(tok));
    }
    return dct::FrequencyMask::from_indices(idx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("malformed mask '" + t + "': " + e.what());
  }
}

nn::ModelConfig build_model_config(const ModelSpec& spec, int channels, int height, int width, int classes) {
  if (spec.kind == ModelSpec::Kind::Mlp)
    return nn::ModelConfig::mlp(channels, height, width, spec.hidden, classes);
  return nn::ModelConfig::small_cnn(channels, height, width, spec.conv1, spec.conv2, spec.dense_hidden, classes);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.has_parent_path() ? path.parent_path() : ".");
}

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  AttackDraft attack_draft;
  std::string train_regime = "standard";
  int train_regime_line = 0;
  std::string drop_band_text = "b0-15";
  double drop_p = 0.5;

  static const std::set<std::string> kSections = {"run",    "dataset", "model", "train",
                                                  "attack", "analysis", "sweep"};
  static const std::map<std::string, std::set<std::string>> kKeys = {
      {"run", {"seed", "out_dir"}},
      {"dataset", {"kind", "dir", "train_count", "test_count", "noise_sigma", "normalize"}},
      {"model", {"kind", "hidden", "conv1", "conv2", "dense_hidden"}},
      {"train",
       {"epochs", "lr", "momentum", "batch_size", "eval_every", "eval_attack_samples", "regime",
        "drop_band", "drop_p", "lr_decay_epochs", "lr_decay_factor"}},
      {"attack",
       {"norm", "epsilon", "alpha", "steps", "random_init", "objective", "mask", "lambda", "bands",
        "reversed"}},
      {"analysis", {"samples", "granularity", "class_source", "heatmap_masks"}},
      {"sweep", {"lambda_values", "drop_p_values"}},
  };

  std::string section;
  std::set<std::string> seen;
  std::vector<std::string> hashed_entries;

  std::istringstream lines(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) fail(line_no, "unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key=value, got '" + line + "'");
    if (section.empty()) fail(line_no, "key before any [section] header");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (!kKeys.at(section).count(key)) fail(line_no, "unknown key '" + key + "' in [" + section + "]");
    const std::string qualified = section + "." + key;
    if (!seen.insert(qualified).second) fail(line_no, "duplicate key '" + qualified + "'");
    hashed_entries.push_back(qualified + "=" + value);

    try {
      if (section == "run") {
        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int_strict(value, line_no));
        else cfg.out_dir = value;
      } else if (section == "dataset") {
        if (key == "kind") {
          if (value == "synthetic") cfg.dataset.kind = DatasetConfig::Kind::Synthetic;
          else if (value == "cifar10") cfg.dataset.kind = DatasetConfig::Kind::Cifar10;
          else fail(line_no, "unknown dataset kind '" + value + "'");
        } else if (key == "dir") {
          cfg.dataset.dir = value;
        } else if (key == "train_count") {
          cfg.dataset.train_count = static_cast<int>(parse_int_strict(value, line_no));
        } else if (key == "test_count") {
          cfg.dataset.test_count = static_cast<int>(parse_int_strict(value, line_no));
        } else if (key == "noise_sigma") {
          cfg.dataset.noise_sigma = parse_double_strict(value, line_no);
        } else if (key == "normalize") {
          cfg.dataset.normalize = parse_bool_strict(value, line_no);
        }
      } else if (section == "model") {
        if (key == "kind") {
          if (value == "mlp") cfg.model.kind = ModelSpec::Kind::Mlp;
          else if (value == "cnn") cfg.model.kind = ModelSpec::Kind::Cnn;
          else fail(line_no, "unknown model kind '" + value + "'");
        } else if (key == "hidden") {
          cfg.model.hidden = parse_int_list(value, line_no);
        } else if (key == "conv1") {
          cfg.model.conv1 = static_cast<int>(parse_int_strict(value, line_no));
        } else if (key == "conv2") {
          cfg.model.conv2 = static_cast<int>(parse_int_strict(value, line_no));
        } else if (key == "dense_hidden") {
          cfg.model.dense_hidden = static_cast<int>(parse_int_strict(value, line_no));
        }
      } else if (section == "train") {
        if (key == "epochs") cfg.train.epochs = static_cast<int>(parse_int_strict(value, line_no));
        else if (key == "lr") cfg.train.lr.initial = parse_double_strict(value, line_no);
        else if (key == "momentum") cfg.train.momentum = parse_double_strict(value, line_no);
        else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int_strict(value, line_no));
        else if (key == "eval_every") cfg.train.eval_every = static_cast<int>(parse_int_strict(value, line_no));
        else if (key == "eval_attack_samples")
          cfg.train.eval_attack_samples = static_cast<int>(parse_int_strict(value, line_no));
        else if (key == "regime") { train_regime = value; train_regime_line = line_no; }
        else if (key == "drop_band") drop_band_text = value;
        else if (key == "drop_p") drop_p = parse_double_strict(value, line_no);
        else if (key == "lr_decay_epochs") cfg.train.lr.decay_epochs = parse_int_list(value, line_no);
        else if (key == "lr_decay_factor") cfg.train.lr.factor = parse_double_strict(value, line_no);
      } else if (section == "attack") {
        if (key == "norm") {
          if (value == "linf") cfg.attack.norm = attacks::Norm::LInf;
          else if (value == "l2") cfg.attack.norm = attacks::Norm::L2;
          else fail(line_no, "unknown norm '" + value + "'");
        } else if (key == "epsilon") {
          cfg.attack.epsilon = parse_fraction(value);
          if (cfg.attack.epsilon <= 0.0) fail(line_no, "epsilon must be positive");
        } else if (key == "alpha") {
          cfg.attack.alpha = parse_fraction(value);
        } else if (key == "steps") {
          cfg.attack.steps = static_cast<int>(parse_int_strict(value, line_no));
        } else if (key == "random_init") {
          cfg.attack.random_init = parse_bool_strict(value, line_no);
        } else if (key == "objective") {
          if (value == "cross_entropy") cfg.attack.objective = attacks::AttackObjective::CrossEntropy;
          else if (value == "max_logit") cfg.attack.objective = attacks::AttackObjective::MaxLogit;
          else fail(line_no, "unknown objective '" + value + "'");
        } else if (key == "mask") {
          attack_draft.mask = value;
          attack_draft.mask_line = line_no;
        } else if (key == "lambda") {
          attack_draft.lambda = value;
          attack_draft.lambda_line = line_no;
        } else if (key == "bands") {
          attack_draft.bands = value;
          attack_draft.bands_line = line_no;
        } else if (key == "reversed") {
          attack_draft.reversed = parse_bool_strict(value, line_no);
          attack_draft.reversed_line = line_no;
        }
      } else if (section == "analysis") {
        if (key == "samples") cfg.analysis.samples = static_cast<int>(parse_int_strict(value, line_no));
        else if (key == "granularity") {
          if (value == "per_frequency") cfg.analysis.granularity = analysis::Granularity::PerFrequency;
          else if (value == "band16") cfg.analysis.granularity = analysis::Granularity::Band16;
          else if (value == "band4") cfg.analysis.granularity = analysis::Granularity::Band4;
          else fail(line_no, "unknown granularity '" + value + "'");
        } else if (key == "class_source") {
          if (value == "true_label") cfg.analysis.class_source = analysis::ClassSource::TrueLabel;
          else if (value == "predicted") cfg.analysis.class_source = analysis::ClassSource::Predicted;
          else fail(line_no, "unknown class_source '" + value + "'");
        } else if (key == "heatmap_masks") {
          cfg.analysis.heatmap_masks = split_commas(value);
          for (const auto& m : cfg.analysis.heatmap_masks) {
            try {
              parse_mask(m);
            } catch (const std::exception& e) {
              fail(line_no, e.what());
            }
          }
        }
      } else if (section == "sweep") {
        if (key == "lambda_values") cfg.sweep.lambda_values = parse_double_list(value, line_no);
        else if (key == "drop_p_values") cfg.sweep.drop_p_values = parse_double_list(value, line_no);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(line_no, e.what());
    }
  }

  // At most one constraint family may be set; "reversed" only qualifies "bands".
  int constraint_count = (!attack_draft.mask.empty()) + (!attack_draft.lambda.empty()) +
                         (!attack_draft.bands.empty());
  if (constraint_count > 1)
    fail(std::max({attack_draft.mask_line, attack_draft.lambda_line, attack_draft.bands_line}),
         "mask, lambda and bands are mutually exclusive");
  if (attack_draft.reversed_line && attack_draft.bands.empty())
    fail(attack_draft.reversed_line, "'reversed' requires 'bands'");
  if (!attack_draft.mask.empty()) {
    try {
      cfg.attack.constraint = attacks::MaskConstraint{parse_mask(attack_draft.mask)};
    } catch (const std::exception& e) {
      fail(attack_draft.mask_line, e.what());
    }
  } else if (!attack_draft.lambda.empty()) {
    double lam = parse_double_strict(attack_draft.lambda, attack_draft.lambda_line);
    cfg.attack.constraint = attacks::LambdaMixConstraint{lam};
  } else if (!attack_draft.bands.empty()) {
    attacks::BandEpsilonConstraint be;
    be.bands = static_cast<int>(parse_int_strict(attack_draft.bands, attack_draft.bands_line));
    be.reversed = attack_draft.reversed;
    cfg.attack.constraint = be;
  }

  if (train_regime == "standard") {
    cfg.train.regime = training::StandardRegime{};
  } else if (train_regime == "adversarial") {
    cfg.train.regime = training::AdversarialRegime{cfg.attack};
  } else if (train_regime == "freq_drop") {
    try {
      cfg.train.regime = training::FreqDropRegime{dct::Band::parse(drop_band_text), drop_p};
    } catch (const std::exception& e) {
      fail(train_regime_line ? train_regime_line : line_no, e.what());
    }
  } else {
    fail(train_regime_line, "unknown regime '" + train_regime + "'");
  }

  cfg.train.seed = cfg.seed;
  if (cfg.dataset.kind == DatasetConfig::Kind::Cifar10) {
    if (cfg.dataset.dir.empty()) throw ConfigError("config: cifar10 dataset requires dataset.dir");
    if (cfg.dataset.dir.is_relative()) cfg.dataset.dir = base_dir / cfg.dataset.dir;
    if (!std::filesystem::is_directory(cfg.dataset.dir))
      throw ConfigError("config: dataset.dir is not a directory: " + cfg.dataset.dir.string());
  }
  if (cfg.out_dir.is_relative()) cfg.out_dir = base_dir / cfg.out_dir;

  try {
    cfg.attack.validate();
    cfg.train.validate();
    if (cfg.dataset.train_count <= 0 || cfg.dataset.test_count <= 0)
      throw std::invalid_argument("dataset counts must be positive");
    if (cfg.dataset.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be non-negative");
    if (cfg.analysis.samples <= 0) throw std::invalid_argument("analysis.samples must be positive");
    if (cfg.analysis.heatmap_masks.empty())
      throw std::invalid_argument("analysis.heatmap_masks must not be empty");
    for (double p : cfg.sweep.drop_p_values)
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("sweep drop_p outside [0,1]");
    for (double l : cfg.sweep.lambda_values)
      if (l < 0.0 || l > 1.0) throw std::invalid_argument("sweep lambda outside [0,1]");
    for (int h : cfg.model.hidden)
      if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // FNV-1a over the sorted entries: insensitive to key order in the file.
  std::sort(hashed_entries.begin(), hashed_entries.end());
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& entry : hashed_entries) {
    for (unsigned char c : entry) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  cfg.config_hash = hex;
  return cfg;
}

}  // namespace fadv::cli
