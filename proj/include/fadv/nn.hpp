#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fadv/tensor.hpp"

namespace fadv::nn {

// Layer descriptors. Output extents are given; input extents are resolved by
// shape propagation when the model is built.
struct Conv3x3 {
  int out_channels = 0;  // 3x3 kernel, stride 1, zero padding 1
};
struct Dense {
  int out_dim = 0;
};
struct ReLU {};
struct MaxPool2x2 {};  // stride 2, input extents must be even
struct Flatten {};

using LayerSpec = std::variant<Conv3x3, Dense, ReLU, MaxPool2x2, Flatten>;

std::string layer_to_string(const LayerSpec& spec);
LayerSpec layer_from_string(const std::string& text);

/// Architecture description. Round-trips through a one-line string so that a
/// checkpoint carries enough to rebuild the model.
struct ModelConfig {
  int in_channels = 1;
  int height = 32;
  int width = 32;
  int classes = 2;
  std::vector<LayerSpec> layers;

  /// Shape-propagates the stack; throws if any layer is fed an incompatible
  /// shape or if the final output is not a length-`classes` vector.
  void validate() const;

  std::string to_string() const;
  static ModelConfig from_string(const std::string& text);

  static ModelConfig mlp(int in_c, int h, int w, const std::vector<int>& hidden, int classes);
  static ModelConfig small_cnn(int in_c, int h, int w, int c1, int c2, int dense_hidden, int classes);
};

struct LayerPlanEntry {
  LayerSpec spec;
  std::vector<std::size_t> in_shape;
  std::vector<std::size_t> out_shape;
  std::size_t param_offset = 0;
  std::size_t param_count = 0;
};

/// Feed-forward classifier: a layer stack plus one flat parameter vector.
/// Forward and backward are per sample; batches loop. The model itself is
/// immutable during inference, so concurrent forward calls are safe.
class Model {
 public:
  /// Zero-initialised parameters.
  static Model build(const ModelConfig& cfg);
  /// He-normal weights, zero biases, drawn from `rng` layer by layer.
  static Model init(const ModelConfig& cfg, std::mt19937_64& rng);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<LayerPlanEntry>& plan() const { return plan_; }
  int classes() const { return cfg_.classes; }
  std::vector<std::size_t> input_shape() const;
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Logits for a (B, C, H, W) batch -> (B, classes), or a single (C, H, W)
  /// sample -> (classes).
  Tensor forward(const Tensor& x) const;

  /// Activation record of one forward pass: acts[i] is layer i's input,
  /// acts.back() the logits.
  struct Tape {
    std::vector<Tensor> acts;
  };

  Tensor forward_sample(const Tensor& x, Tape* tape) const;

  /// Backpropagates `grad_logits` through the tape. Returns the gradient at
  /// the input; accumulates parameter gradients into `param_grad` unless it is
  /// empty.
  Tensor backward_sample(const Tape& tape, const Tensor& grad_logits, std::span<double> param_grad) const;

 private:
  ModelConfig cfg_;
  std::vector<LayerPlanEntry> plan_;
  std::vector<double> params_;
};

struct CeResult {
  double loss = 0.0;
  std::vector<double> probs;
};

/// Numerically stable softmax cross-entropy against a single target class.
CeResult softmax_cross_entropy(std::span<const double> logits, int target);

/// Index of the largest value; ties resolve to the lowest index.
int argmax_lowest(std::span<const double> logits);

struct LossObjective {
  int target = 0;  // softmax cross-entropy against this label
};
struct MaxLogitObjective {};  // the winning logit itself

using Objective = std::variant<LossObjective, MaxLogitObjective>;

/// d(objective)/dx for a single (C, H, W) sample or per-sample for a batch.
Tensor input_gradient(const Model& model, const Tensor& x, const Objective& objective);

/// Mean loss over the batch; accumulates d(mean loss)/d(params) into
/// `param_grad` (which must be zeroed by the caller).
double loss_and_param_gradient(const Model& model, const Tensor& batch, std::span<const int> labels,
                               std::span<double> param_grad);

double batch_loss(const Model& model, const Tensor& batch, std::span<const int> labels);

/// SGD with classical momentum: v <- mu*v + g, theta <- theta - lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum);

  double lr() const { return lr_; }
  void set_lr(double lr);

  /// One update from one batch. Returns the pre-update mean loss.
  double step(Model& model, const Tensor& batch, std::span<const int> labels);

 private:
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

}  // namespace fadv::nn
