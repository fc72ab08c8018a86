#include "fadv/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fadv/rng.hpp"

namespace fadv::attacks {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project(Tensor& delta, Norm norm, double epsilon) {
  if (norm == Norm::LInf) {
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = std::clamp(delta[i], -epsilon, epsilon);
  } else {
    const double n = l2_norm(delta);
    if (n > epsilon && n > 0.0) {
      const double scale = epsilon / n;
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= scale;
    }
  }
}

void clamp_pixels(Tensor& delta, const Tensor& x) {
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = std::clamp(x[i] + delta[i], 0.0, 1.0) - x[i];
  }
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("attack: epsilon must be > 0");
  if (alpha < 0.0) throw std::invalid_argument("attack: alpha must be >= 0");
  if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
  if (const auto* mix = std::get_if<LambdaMixConstraint>(&constraint)) {
    if (mix->lambda < 0.0 || mix->lambda > 1.0) throw std::invalid_argument("attack: lambda must lie in [0, 1]");
    if (norm != Norm::LInf) throw std::invalid_argument("attack: the lambda mix is an L-inf construction");
  }
  if (const auto* be = std::get_if<BandEpsilonConstraint>(&constraint)) {
    if (be->bands < 2) throw std::invalid_argument("attack: band epsilons need >= 2 bands");
    if (dct::kBlockCoeffs % be->bands != 0) throw std::invalid_argument("attack: band count must divide 64");
    if (norm != Norm::LInf) throw std::invalid_argument("attack: band epsilons are an L-inf construction");
  }
}

Tensor TargetModel::logits(const Tensor& x_raw) const {
  if (model == nullptr) throw std::runtime_error("target model: missing model");
  return model->forward(norm.is_identity() ? x_raw : data::normalize(x_raw, norm));
}

int TargetModel::predict(const Tensor& x_raw) const {
  const Tensor l = logits(x_raw);
  if (l.rank() != 1) throw std::invalid_argument("predict: expected a single sample");
  return nn::argmax_lowest(l.values());
}

TargetModel::Grad TargetModel::objective_gradient(const Tensor& x_raw, int label, AttackObjective objective) const {
  if (model == nullptr) throw std::runtime_error("target model: missing model");
  const bool ident = norm.is_identity();
  const Tensor x_in = ident ? x_raw : data::normalize(x_raw, norm);
  nn::Model::Tape tape;
  Grad out;
  out.logits = model->forward_sample(x_in, &tape);
  Tensor grad_logits({static_cast<std::size_t>(model->classes())});
  if (objective == AttackObjective::CrossEntropy) {
    const nn::CeResult ce = nn::softmax_cross_entropy(out.logits.values(), label);
    out.value = ce.loss;
    for (int c = 0; c < model->classes(); ++c) grad_logits[c] = ce.probs[c] - (c == label ? 1.0 : 0.0);
  } else {
    const int top = nn::argmax_lowest(out.logits.values());
    out.value = out.logits[static_cast<std::size_t>(top)];
    grad_logits[static_cast<std::size_t>(top)] = 1.0;
  }
  out.grad = model->backward_sample(tape, grad_logits, {});
  if (!ident) {
    // Chain rule through x_in = (x_raw - mean) / std.
    const std::size_t plane = out.grad.extent(1) * out.grad.extent(2);
    for (std::size_t c = 0; c < out.grad.extent(0); ++c) {
      for (std::size_t i = 0; i < plane; ++i) out.grad[c * plane + i] /= norm.std_dev[c];
    }
  }
  return out;
}

TargetModel make_target(const nn::Model& model, data::Normalization norm, std::string id) {
  norm.validate();
  TargetModel t;
  t.model = &model;
  t.norm = std::move(norm);
  t.id = std::move(id);
  return t;
}

Tensor dct_pgd_step(const Tensor& gradient, const dct::FrequencyMask& mask, Norm norm, double alpha, int* null_step) {
  const Tensor projected = dct::apply_mask_freq(gradient, mask, dct::MaskDomain::Spatial);
  Tensor step(gradient.shape());
  if (norm == Norm::LInf) {
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = alpha * sgn(projected[i]);
  } else {
    const double n = l2_norm(projected);
    if (n == 0.0) {
      if (null_step != nullptr) *null_step = 1;
      return step;  // zero: the caller skips this step
    }
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = alpha * projected[i] / n;
  }
  if (null_step != nullptr) *null_step = 0;
  return step;
}

std::vector<double> unequal_epsilon_schedule(int bands, double epsilon, bool reversed) {
  if (bands < 2) throw std::invalid_argument("band epsilons: need >= 2 bands");
  if (!(epsilon > 0.0)) throw std::invalid_argument("band epsilons: epsilon must be > 0");
  std::vector<double> eta(static_cast<std::size_t>(bands));
  for (int i = 0; i < bands; ++i) eta[static_cast<std::size_t>(i)] = epsilon / static_cast<double>(bands - i);
  if (reversed) std::reverse(eta.begin(), eta.end());
  return eta;
}

Tensor unequal_epsilon_delta(const Tensor& gradient, int bands, double epsilon, bool reversed) {
  const std::vector<dct::Band> partition = dct::band_partition(bands);
  const std::vector<double> eta = unequal_epsilon_schedule(bands, epsilon, reversed);
  const Tensor coeffs = dct::dct2_blockwise(gradient);
  Tensor delta(gradient.shape());
  for (int i = 0; i < bands; ++i) {
    const Tensor masked =
        dct::apply_mask_freq(coeffs, dct::FrequencyMask::from_band(partition[static_cast<std::size_t>(i)]),
                             dct::MaskDomain::AlreadyDct);
    const Tensor g_hat = dct::idct2_blockwise(masked);
    const double a = eta[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] += a * sgn(g_hat[j]);
  }
  return delta;
}

AttackResult run_attack(const TargetModel& target, const Tensor& x, int label, const AttackConfig& cfg,
                        std::mt19937_64* init_rng) {
  cfg.validate();
  if (x.rank() != 3) throw std::invalid_argument("attack: x must be a single (C,H,W) sample");
  if (target.model == nullptr) throw std::runtime_error("attack: missing model");
  if (label < 0 || label >= target.model->classes()) {
    throw std::invalid_argument("attack: label " + std::to_string(label) + " out of range");
  }

  AttackResult result;
  result.delta = Tensor(x.shape());
  if (cfg.random_init) {
    if (init_rng == nullptr) throw std::invalid_argument("attack: random_init requires an init rng");
    std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
    for (std::size_t i = 0; i < result.delta.size(); ++i) result.delta[i] = u(*init_rng);
    project(result.delta, cfg.norm, cfg.epsilon);
    if (cfg.pixel_clamp) clamp_pixels(result.delta, x);
  }

  result.step_losses.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  Tensor x_adv = x;
  auto refresh_adv = [&]() {
    for (std::size_t i = 0; i < x_adv.size(); ++i) x_adv[i] = x[i] + result.delta[i];
  };
  refresh_adv();

  for (int step = 0; step < cfg.steps; ++step) {
    const TargetModel::Grad ge = target.objective_gradient(x_adv, label, cfg.objective);
    result.step_losses.push_back(ge.value);
    Tensor dir;
    int null_step = 0;
    if (std::holds_alternative<NoConstraint>(cfg.constraint)) {
      dir = Tensor(x.shape());
      if (cfg.norm == Norm::LInf) {
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = cfg.alpha * sgn(ge.grad[i]);
      } else {
        const double n = l2_norm(ge.grad);
        if (n == 0.0) {
          null_step = 1;
        } else {
          for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = cfg.alpha * ge.grad[i] / n;
        }
      }
    } else if (const auto* mc = std::get_if<MaskConstraint>(&cfg.constraint)) {
      dir = dct_pgd_step(ge.grad, mc->mask, cfg.norm, cfg.alpha, &null_step);
    } else if (const auto* mix = std::get_if<LambdaMixConstraint>(&cfg.constraint)) {
      const Tensor low = dct_pgd_step(ge.grad, dct::FrequencyMask::from_band(dct::kLowHalf), Norm::LInf, cfg.alpha);
      const Tensor high = dct_pgd_step(ge.grad, dct::FrequencyMask::from_band(dct::kHighHalf), Norm::LInf, cfg.alpha);
      dir = Tensor(x.shape());
      for (std::size_t i = 0; i < dir.size(); ++i) {
        dir[i] = mix->lambda * low[i] + (1.0 - mix->lambda) * high[i];
      }
    } else {
      const auto& be = std::get<BandEpsilonConstraint>(cfg.constraint);
      dir = unequal_epsilon_delta(ge.grad, be.bands, cfg.epsilon, be.reversed);
    }
    if (null_step != 0) {
      ++result.null_steps;
    } else {
      for (std::size_t i = 0; i < result.delta.size(); ++i) result.delta[i] += dir[i];
      project(result.delta, cfg.norm, cfg.epsilon);
      if (cfg.pixel_clamp) clamp_pixels(result.delta, x);
    }
    refresh_adv();
  }

  // The loop recorded the objective before each step; this closes the series
  // with the value at the returned delta.
  const TargetModel::Grad final_eval = target.objective_gradient(x_adv, label, cfg.objective);
  result.step_losses.push_back(final_eval.value);
  result.predicted = nn::argmax_lowest(final_eval.logits.values());
  result.success = result.predicted != label;
  result.adversarial = std::move(x_adv);
  ensure_finite(result.delta, "attack delta");
  return result;
}

double clean_accuracy(const TargetModel& target, const data::Dataset& dataset, int limit) {
  const std::size_t n =
      limit < 0 ? dataset.items.size() : std::min(dataset.items.size(), static_cast<std::size_t>(limit));
  if (n == 0) throw std::invalid_argument("accuracy: no samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target.predict(dataset.items[i].pixels) == dataset.items[i].label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

double accuracy_under_attack(const TargetModel& target, const data::Dataset& dataset, const AttackConfig& cfg,
                             int limit, std::mt19937_64* init_rng) {
  const std::size_t n =
      limit < 0 ? dataset.items.size() : std::min(dataset.items.size(), static_cast<std::size_t>(limit));
  if (n == 0) throw std::invalid_argument("accuracy: no samples");
  std::mt19937_64 fallback_rng = make_stream(0, Stream::AttackInit);
  if (init_rng == nullptr) init_rng = &fallback_rng;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const AttackResult r = run_attack(target, dataset.items[i].pixels, dataset.items[i].label, cfg, init_rng);
    if (!r.success) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace fadv::attacks
