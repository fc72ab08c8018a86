#pragma once

#include <random>
#include <string>
#include <variant>
#include <vector>

#include "fadv/data.hpp"
#include "fadv/dct.hpp"
#include "fadv/nn.hpp"
#include "fadv/tensor.hpp"

namespace fadv::attacks {

enum class Norm { LInf, L2 };
enum class AttackObjective { CrossEntropy, MaxLogit };

struct NoConstraint {};

/// Steps are projected onto a frequency subspace before being applied:
/// g_hat = idct(dct(g) .* M). Sign steps alias energy back outside the kept
/// set; normalized L2 steps do not.
struct MaskConstraint {
  dct::FrequencyMask mask;
};

/// delta += lambda*alpha*sgn(g_hat_low) + (1-lambda)*alpha*sgn(g_hat_high),
/// low = zigzag 0-31, high = 32-63, with one shared L-inf projection.
struct LambdaMixConstraint {
  double lambda = 0.5;
};

/// Per-band sign steps with budgets eta_i = epsilon / (bands - i), i counted
/// from the lowest band; `reversed` flips the assignment so band 0 gets the
/// largest budget.
struct BandEpsilonConstraint {
  int bands = 4;
  bool reversed = false;
};

using Constraint = std::variant<NoConstraint, MaskConstraint, LambdaMixConstraint, BandEpsilonConstraint>;

struct AttackConfig {
  Norm norm = Norm::LInf;
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 10;
  bool random_init = false;
  bool pixel_clamp = true;
  AttackObjective objective = AttackObjective::CrossEntropy;
  Constraint constraint = NoConstraint{};

  void validate() const;
};

struct AttackResult {
  Tensor delta;
  Tensor adversarial;
  /// step_losses[0] is the objective at the (possibly random) start;
  /// step_losses[i] is the objective after step i.
  std::vector<double> step_losses;
  bool success = false;  // prediction at x + delta differs from the true label
  int predicted = -1;
  int null_steps = 0;  // L2 steps skipped because the masked gradient was zero
};

/// Classifier plus the input normalization it was trained with. Attacks work
/// in raw pixel scale; gradients are mapped back through the affine remap.
struct TargetModel {
  const nn::Model* model = nullptr;
  data::Normalization norm;
  std::string id;

  Tensor logits(const Tensor& x_raw) const;
  int predict(const Tensor& x_raw) const;

  struct Grad {
    Tensor grad;  // d(objective)/d(raw input)
    double value = 0.0;
    Tensor logits;
  };

  Grad objective_gradient(const Tensor& x_raw, int label, AttackObjective objective) const;
};

TargetModel make_target(const nn::Model& model, data::Normalization norm, std::string id = "");

/// One constrained ascent step from a raw-input gradient: the gradient is
/// projected onto the mask's subspace, then scaled by the norm rule
/// (alpha * sign for L-inf, alpha * g_hat / ||g_hat|| for L2).
Tensor dct_pgd_step(const Tensor& gradient, const dct::FrequencyMask& mask, Norm norm, double alpha,
                    int* null_step = nullptr);

std::vector<double> unequal_epsilon_schedule(int bands, double epsilon, bool reversed);

/// Sum of per-band L-inf sign steps with the unequal budgets; equals the sum
/// of independent dct_pgd_step calls, one per band of the partition.
Tensor unequal_epsilon_delta(const Tensor& gradient, int bands, double epsilon, bool reversed);

/// Iterative ascent on the configured objective with the configured step
/// constraint, projecting delta onto the epsilon ball after every step and
/// clamping x + delta to [0, 1] when pixel_clamp is set. `init_rng` is only
/// consumed when random_init is set.
AttackResult run_attack(const TargetModel& target, const Tensor& x, int label, const AttackConfig& cfg,
                        std::mt19937_64* init_rng = nullptr);

double clean_accuracy(const TargetModel& target, const data::Dataset& dataset, int limit = -1);

/// Accuracy (percent) on attacked inputs over the first `limit` samples.
double accuracy_under_attack(const TargetModel& target, const data::Dataset& dataset, const AttackConfig& cfg,
                             int limit = -1, std::mt19937_64* init_rng = nullptr);

}  // namespace fadv::attacks
