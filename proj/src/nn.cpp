#include "fadv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fadv::nn {

namespace {

constexpr int kKernel = 3;

std::vector<std::size_t> propagate_shape(const LayerSpec& spec, const std::vector<std::size_t>& in) {
  if (const auto* conv = std::get_if<Conv3x3>(&spec)) {
    if (in.size() != 3) throw std::invalid_argument("conv: input must be (C,H,W), got rank " + std::to_string(in.size()));
    if (conv->out_channels <= 0) throw std::invalid_argument("conv: out_channels must be positive");
    return {static_cast<std::size_t>(conv->out_channels), in[1], in[2]};
  }
  if (const auto* dense = std::get_if<Dense>(&spec)) {
    if (in.size() != 1) throw std::invalid_argument("dense: input must be flat, got rank " + std::to_string(in.size()));
    if (dense->out_dim <= 0) throw std::invalid_argument("dense: out_dim must be positive");
    return {static_cast<std::size_t>(dense->out_dim)};
  }
  if (std::holds_alternative<ReLU>(spec)) return in;
  if (std::holds_alternative<MaxPool2x2>(spec)) {
    if (in.size() != 3) throw std::invalid_argument("pool: input must be (C,H,W)");
    if (in[1] % 2 != 0 || in[2] % 2 != 0) throw std::invalid_argument("pool: height and width must be even");
    return {in[0], in[1] / 2, in[2] / 2};
  }
  // Flatten
  if (in.size() != 3) throw std::invalid_argument("flatten: input must be (C,H,W)");
  return {in[0] * in[1] * in[2]};
}

std::size_t layer_param_count(const LayerSpec& spec, const std::vector<std::size_t>& in) {
  if (const auto* conv = std::get_if<Conv3x3>(&spec)) {
    return static_cast<std::size_t>(conv->out_channels) * in[0] * kKernel * kKernel +
           static_cast<std::size_t>(conv->out_channels);
  }
  if (const auto* dense = std::get_if<Dense>(&spec)) {
    return static_cast<std::size_t>(dense->out_dim) * in[0] + static_cast<std::size_t>(dense->out_dim);
  }
  return 0;
}

void conv_forward(const double* in, int ci, int h, int w, const double* weights, const double* bias, int co,
                  double* out) {
  for (int o = 0; o < co; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = bias[o];
        for (int i = 0; i < ci; ++i) {
          const double* wk = weights + ((o * ci + i) * kKernel * kKernel);
          const double* plane = in + i * h * w;
          for (int ky = 0; ky < kKernel; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= w) continue;
              s += wk[ky * kKernel + kx] * plane[yy * w + xx];
            }
          }
        }
        out[(o * h + y) * w + x] = s;
      }
    }
  }
}

void conv_backward(const double* in, int ci, int h, int w, const double* weights, int co, const double* gout,
                   double* gin, double* gweights, double* gbias) {
  std::fill(gin, gin + static_cast<std::size_t>(ci) * h * w, 0.0);
  for (int o = 0; o < co; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = gout[(o * h + y) * w + x];
        if (gbias != nullptr) gbias[o] += g;
        for (int i = 0; i < ci; ++i) {
          const double* wk = weights + ((o * ci + i) * kKernel * kKernel);
          double* gwk = gweights != nullptr ? gweights + ((o * ci + i) * kKernel * kKernel) : nullptr;
          const double* plane = in + i * h * w;
          double* gplane = gin + i * h * w;
          for (int ky = 0; ky < kKernel; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= w) continue;
              if (gwk != nullptr) gwk[ky * kKernel + kx] += g * plane[yy * w + xx];
              gplane[yy * w + xx] += g * wk[ky * kKernel + kx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::string layer_to_string(const LayerSpec& spec) {
  if (const auto* conv = std::get_if<Conv3x3>(&spec)) return "conv:" + std::to_string(conv->out_channels);
  if (const auto* dense = std::get_if<Dense>(&spec)) return "dense:" + std::to_string(dense->out_dim);
  if (std::holds_alternative<ReLU>(spec)) return "relu";
  if (std::holds_alternative<MaxPool2x2>(spec)) return "pool";
  return "flatten";
}

LayerSpec layer_from_string(const std::string& text) {
  auto parse_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("layer: bad count in '" + text + "'");
    }
    if (used != s.size() || v <= 0) throw std::invalid_argument("layer: bad count in '" + text + "'");
    return v;
  };
  if (text == "relu") return ReLU{};
  if (text == "pool") return MaxPool2x2{};
  if (text == "flatten") return Flatten{};
  if (text.rfind("conv:", 0) == 0) return Conv3x3{parse_int(text.substr(5))};
  if (text.rfind("dense:", 0) == 0) return Dense{parse_int(text.substr(6))};
  throw std::invalid_argument("layer: unknown spec '" + text + "'");
}

void ModelConfig::validate() const {
  if (in_channels <= 0 || height <= 0 || width <= 0) throw std::invalid_argument("model: input extents must be positive");
  if (classes < 1) throw std::invalid_argument("model: classes must be >= 1");
  if (layers.empty()) throw std::invalid_argument("model: layer stack is empty");
  std::vector<std::size_t> shape = {static_cast<std::size_t>(in_channels), static_cast<std::size_t>(height),
                                    static_cast<std::size_t>(width)};
  for (const LayerSpec& spec : layers) shape = propagate_shape(spec, shape);
  if (shape.size() != 1 || shape[0] != static_cast<std::size_t>(classes)) {
    throw std::invalid_argument("model: stack output does not match classes=" + std::to_string(classes));
  }
}

std::string ModelConfig::to_string() const {
  std::ostringstream os;
  os << "in=" << in_channels << "x" << height << "x" << width << " classes=" << classes << " layers=";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ',';
    os << layer_to_string(layers[i]);
  }
  return os.str();
}

ModelConfig ModelConfig::from_string(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string token;
  bool saw_in = false, saw_classes = false, saw_layers = false;
  while (is >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("model config: bad token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "in") {
      int c = 0, h = 0, w = 0;
      char x1 = 0, x2 = 0;
      std::istringstream vs(value);
      if (!(vs >> c >> x1 >> h >> x2 >> w) || x1 != 'x' || x2 != 'x' || !vs.eof()) {
        throw std::invalid_argument("model config: bad input shape '" + value + "'");
      }
      cfg.in_channels = c;
      cfg.height = h;
      cfg.width = w;
      saw_in = true;
    } else if (key == "classes") {
      cfg.classes = std::stoi(value);
      saw_classes = true;
    } else if (key == "layers") {
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) cfg.layers.push_back(layer_from_string(item));
      saw_layers = true;
    } else {
      throw std::invalid_argument("model config: unknown key '" + key + "'");
    }
  }
  if (!saw_in || !saw_classes || !saw_layers) throw std::invalid_argument("model config: missing in/classes/layers");
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::mlp(int in_c, int h, int w, const std::vector<int>& hidden, int classes) {
  ModelConfig cfg;
  cfg.in_channels = in_c;
  cfg.height = h;
  cfg.width = w;
  cfg.classes = classes;
  cfg.layers.push_back(Flatten{});
  for (int width_i : hidden) {
    cfg.layers.push_back(Dense{width_i});
    cfg.layers.push_back(ReLU{});
  }
  cfg.layers.push_back(Dense{classes});
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::small_cnn(int in_c, int h, int w, int c1, int c2, int dense_hidden, int classes) {
  ModelConfig cfg;
  cfg.in_channels = in_c;
  cfg.height = h;
  cfg.width = w;
  cfg.classes = classes;
  cfg.layers = {Conv3x3{c1}, ReLU{}, MaxPool2x2{}, Conv3x3{c2}, ReLU{}, MaxPool2x2{}, Flatten{}};
  if (dense_hidden > 0) {
    cfg.layers.push_back(Dense{dense_hidden});
    cfg.layers.push_back(ReLU{});
  }
  cfg.layers.push_back(Dense{classes});
  cfg.validate();
  return cfg;
}

Model Model::build(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  std::vector<std::size_t> shape = {static_cast<std::size_t>(cfg.in_channels), static_cast<std::size_t>(cfg.height),
                                    static_cast<std::size_t>(cfg.width)};
  std::size_t offset = 0;
  for (const LayerSpec& spec : cfg.layers) {
    LayerPlanEntry entry;
    entry.spec = spec;
    entry.in_shape = shape;
    entry.out_shape = propagate_shape(spec, shape);
    entry.param_offset = offset;
    entry.param_count = layer_param_count(spec, shape);
    offset += entry.param_count;
    shape = entry.out_shape;
    m.plan_.push_back(std::move(entry));
  }
  m.params_.assign(offset, 0.0);
  return m;
}

Model Model::init(const ModelConfig& cfg, std::mt19937_64& rng) {
  Model m = build(cfg);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const LayerPlanEntry& entry : m.plan_) {
    if (entry.param_count == 0) continue;
    std::size_t weight_count = 0;
    double fan_in = 1.0;
    if (const auto* conv = std::get_if<Conv3x3>(&entry.spec)) {
      fan_in = static_cast<double>(entry.in_shape[0]) * kKernel * kKernel;
      weight_count = static_cast<std::size_t>(conv->out_channels) * entry.in_shape[0] * kKernel * kKernel;
    } else if (const auto* dense = std::get_if<Dense>(&entry.spec)) {
      fan_in = static_cast<double>(entry.in_shape[0]);
      weight_count = static_cast<std::size_t>(dense->out_dim) * entry.in_shape[0];
    }
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < weight_count; ++i) m.params_[entry.param_offset + i] = stddev * normal(rng);
    // biases stay zero
  }
  return m;
}

std::vector<std::size_t> Model::input_shape() const {
  return {static_cast<std::size_t>(cfg_.in_channels), static_cast<std::size_t>(cfg_.height),
          static_cast<std::size_t>(cfg_.width)};
}

Tensor Model::forward_sample(const Tensor& x, Tape* tape) const {
  if (x.shape() != input_shape()) {
    throw std::invalid_argument("forward: sample shape " + x.shape_string() + " does not match model input");
  }
  ensure_finite(x, "forward input");
  Tensor cur = x;
  if (tape != nullptr) {
    tape->acts.clear();
    tape->acts.reserve(plan_.size() + 1);
  }
  for (const LayerPlanEntry& entry : plan_) {
    if (tape != nullptr) tape->acts.push_back(cur);
    Tensor next(entry.out_shape);
    const double* params = params_.data() + entry.param_offset;
    if (const auto* conv = std::get_if<Conv3x3>(&entry.spec)) {
      const int ci = static_cast<int>(entry.in_shape[0]);
      const int h = static_cast<int>(entry.in_shape[1]);
      const int w = static_cast<int>(entry.in_shape[2]);
      const double* bias = params + static_cast<std::size_t>(conv->out_channels) * ci * kKernel * kKernel;
      conv_forward(cur.data(), ci, h, w, params, bias, conv->out_channels, next.data());
    } else if (const auto* dense = std::get_if<Dense>(&entry.spec)) {
      const int n = static_cast<int>(entry.in_shape[0]);
      const int m = dense->out_dim;
      const double* bias = params + static_cast<std::size_t>(m) * n;
      for (int j = 0; j < m; ++j) {
        double s = bias[j];
        const double* row = params + static_cast<std::size_t>(j) * n;
        for (int i = 0; i < n; ++i) s += row[i] * cur[i];
        next[j] = s;
      }
    } else if (std::holds_alternative<ReLU>(entry.spec)) {
      for (std::size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] > 0.0 ? cur[i] : 0.0;
    } else if (std::holds_alternative<MaxPool2x2>(entry.spec)) {
      const int c = static_cast<int>(entry.in_shape[0]);
      const int h = static_cast<int>(entry.in_shape[1]);
      const int w = static_cast<int>(entry.in_shape[2]);
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h / 2; ++y) {
          for (int x2 = 0; x2 < w / 2; ++x2) {
            double best = cur[(ch * h + 2 * y) * w + 2 * x2];
            best = std::max(best, cur[(ch * h + 2 * y) * w + 2 * x2 + 1]);
            best = std::max(best, cur[(ch * h + 2 * y + 1) * w + 2 * x2]);
            best = std::max(best, cur[(ch * h + 2 * y + 1) * w + 2 * x2 + 1]);
            next[(ch * (h / 2) + y) * (w / 2) + x2] = best;
          }
        }
      }
    } else {  // Flatten
      next = cur.reshaped(entry.out_shape);
    }
    cur = std::move(next);
  }
  if (tape != nullptr) tape->acts.push_back(cur);
  ensure_finite(cur, "forward logits");
  return cur;
}

Tensor Model::backward_sample(const Tape& tape, const Tensor& grad_logits, std::span<double> param_grad) const {
  if (tape.acts.size() != plan_.size() + 1) throw std::invalid_argument("backward: tape does not match model");
  if (!param_grad.empty() && param_grad.size() != params_.size()) {
    throw std::invalid_argument("backward: param_grad length mismatch");
  }
  Tensor grad = grad_logits;
  for (std::size_t li = plan_.size(); li-- > 0;) {
    const LayerPlanEntry& entry = plan_[li];
    const Tensor& in = tape.acts[li];
    if (grad.shape() != entry.out_shape) throw std::invalid_argument("backward: gradient shape mismatch");
    Tensor gin(entry.in_shape);
    const double* params = params_.data() + entry.param_offset;
    double* gparams = param_grad.empty() ? nullptr : param_grad.data() + entry.param_offset;
    if (const auto* conv = std::get_if<Conv3x3>(&entry.spec)) {
      const int ci = static_cast<int>(entry.in_shape[0]);
      const int h = static_cast<int>(entry.in_shape[1]);
      const int w = static_cast<int>(entry.in_shape[2]);
      double* gbias = gparams != nullptr
                          ? gparams + static_cast<std::size_t>(conv->out_channels) * ci * kKernel * kKernel
                          : nullptr;
      conv_backward(in.data(), ci, h, w, params, conv->out_channels, grad.data(), gin.data(), gparams, gbias);
    } else if (const auto* dense = std::get_if<Dense>(&entry.spec)) {
      const int n = static_cast<int>(entry.in_shape[0]);
      const int m = dense->out_dim;
      double* gbias = gparams != nullptr ? gparams + static_cast<std::size_t>(m) * n : nullptr;
      for (int j = 0; j < m; ++j) {
        const double g = grad[j];
        const double* row = params + static_cast<std::size_t>(j) * n;
        double* grow = gparams != nullptr ? gparams + static_cast<std::size_t>(j) * n : nullptr;
        for (int i = 0; i < n; ++i) {
          if (grow != nullptr) grow[i] += g * in[i];
          gin[i] += g * row[i];
        }
        if (gbias != nullptr) gbias[j] += g;
      }
    } else if (std::holds_alternative<ReLU>(entry.spec)) {
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = in[i] > 0.0 ? grad[i] : 0.0;
    } else if (std::holds_alternative<MaxPool2x2>(entry.spec)) {
      const int c = static_cast<int>(entry.in_shape[0]);
      const int h = static_cast<int>(entry.in_shape[1]);
      const int w = static_cast<int>(entry.in_shape[2]);
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h / 2; ++y) {
          for (int x2 = 0; x2 < w / 2; ++x2) {
            // Route to the first maximum in scan order; this is the fixed
            // subgradient convention for ties.
            int by = 2 * y, bx = 2 * x2;
            double best = in[(ch * h + by) * w + bx];
            const int cand[4][2] = {{2 * y, 2 * x2}, {2 * y, 2 * x2 + 1}, {2 * y + 1, 2 * x2}, {2 * y + 1, 2 * x2 + 1}};
            for (int k = 1; k < 4; ++k) {
              const double v = in[(ch * h + cand[k][0]) * w + cand[k][1]];
              if (v > best) {
                best = v;
                by = cand[k][0];
                bx = cand[k][1];
              }
            }
            gin[(ch * h + by) * w + bx] += grad[(ch * (h / 2) + y) * (w / 2) + x2];
          }
        }
      }
    } else {  // Flatten
      gin = grad.reshaped(entry.in_shape);
    }
    grad = std::move(gin);
  }
  ensure_finite(grad, "backward gradient");
  return grad;
}

Tensor Model::forward(const Tensor& x) const {
  if (x.rank() == 3) return forward_sample(x, nullptr);
  if (x.rank() != 4) throw std::invalid_argument("forward: expected (B,C,H,W) or (C,H,W), got " + x.shape_string());
  const std::size_t b = x.extent(0);
  const auto in = input_shape();
  if (x.extent(1) != in[0] || x.extent(2) != in[1] || x.extent(3) != in[2]) {
    throw std::invalid_argument("forward: batch shape " + x.shape_string() + " does not match model input");
  }
  const std::size_t sample_size = in[0] * in[1] * in[2];
  Tensor out({b, static_cast<std::size_t>(cfg_.classes)});
  for (std::size_t s = 0; s < b; ++s) {
    Tensor sample(in);
    std::copy(x.data() + s * sample_size, x.data() + (s + 1) * sample_size, sample.data());
    const Tensor logits = forward_sample(sample, nullptr);
    std::copy(logits.data(), logits.data() + cfg_.classes, out.data() + s * cfg_.classes);
  }
  return out;
}

CeResult softmax_cross_entropy(std::span<const double> logits, int target) {
  if (logits.empty()) throw std::invalid_argument("cross entropy: empty logits");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::invalid_argument("cross entropy: target " + std::to_string(target) + " out of range");
  }
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double log_sum = m + std::log(sum);
  CeResult r;
  r.loss = log_sum - logits[target];
  r.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) r.probs[i] = std::exp(logits[i] - log_sum);
  if (!std::isfinite(r.loss)) throw std::runtime_error("cross entropy: non-finite loss");
  return r;
}

int argmax_lowest(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax: empty logits");
  int best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

Tensor sample_input_gradient(const Model& model, const Tensor& x, const Objective& objective) {
  Model::Tape tape;
  const Tensor logits = model.forward_sample(x, &tape);
  Tensor grad_logits({static_cast<std::size_t>(model.classes())});
  if (const auto* lo = std::get_if<LossObjective>(&objective)) {
    const CeResult ce = softmax_cross_entropy(logits.values(), lo->target);
    for (int c = 0; c < model.classes(); ++c) grad_logits[c] = ce.probs[c] - (c == lo->target ? 1.0 : 0.0);
  } else {
    grad_logits[argmax_lowest(logits.values())] = 1.0;
  }
  return model.backward_sample(tape, grad_logits, {});
}

}  // namespace

Tensor input_gradient(const Model& model, const Tensor& x, const Objective& objective) {
  if (x.rank() == 3) return sample_input_gradient(model, x, objective);
  if (x.rank() != 4) throw std::invalid_argument("input_gradient: expected (B,C,H,W) or (C,H,W)");
  const std::size_t b = x.extent(0);
  const auto in = model.input_shape();
  const std::size_t sample_size = in[0] * in[1] * in[2];
  Tensor out(x.shape());
  for (std::size_t s = 0; s < b; ++s) {
    Tensor sample(in);
    std::copy(x.data() + s * sample_size, x.data() + (s + 1) * sample_size, sample.data());
    const Tensor g = sample_input_gradient(model, sample, objective);
    std::copy(g.data(), g.data() + sample_size, out.data() + s * sample_size);
  }
  return out;
}

double loss_and_param_gradient(const Model& model, const Tensor& batch, std::span<const int> labels,
                               std::span<double> param_grad) {
  if (batch.rank() != 4) throw std::invalid_argument("loss: expected (B,C,H,W) batch");
  const std::size_t b = batch.extent(0);
  if (b == 0) throw std::invalid_argument("loss: empty batch");
  if (labels.size() != b) throw std::invalid_argument("loss: labels length does not match batch");
  if (param_grad.size() != model.param_count()) throw std::invalid_argument("loss: param_grad length mismatch");
  const auto in = model.input_shape();
  const std::size_t sample_size = in[0] * in[1] * in[2];
  const double inv_b = 1.0 / static_cast<double>(b);
  double loss = 0.0;
  Model::Tape tape;
  for (std::size_t s = 0; s < b; ++s) {
    const int label = labels[s];
    if (label < 0 || label >= model.classes()) {
      throw std::invalid_argument("loss: label " + std::to_string(label) + " out of range");
    }
    Tensor sample(in);
    std::copy(batch.data() + s * sample_size, batch.data() + (s + 1) * sample_size, sample.data());
    const Tensor logits = model.forward_sample(sample, &tape);
    const CeResult ce = softmax_cross_entropy(logits.values(), label);
    loss += ce.loss * inv_b;
    Tensor grad_logits({static_cast<std::size_t>(model.classes())});
    for (int c = 0; c < model.classes(); ++c) {
      grad_logits[c] = (ce.probs[c] - (c == label ? 1.0 : 0.0)) * inv_b;
    }
    model.backward_sample(tape, grad_logits, param_grad);
  }
  return loss;
}

double batch_loss(const Model& model, const Tensor& batch, std::span<const int> labels) {
  if (batch.rank() != 4) throw std::invalid_argument("loss: expected (B,C,H,W) batch");
  const std::size_t b = batch.extent(0);
  if (labels.size() != b) throw std::invalid_argument("loss: labels length does not match batch");
  const Tensor logits = model.forward(batch);
  double loss = 0.0;
  for (std::size_t s = 0; s < b; ++s) {
    std::span<const double> row(logits.data() + s * model.classes(), static_cast<std::size_t>(model.classes()));
    loss += softmax_cross_entropy(row, labels[s]).loss;
  }
  return loss / static_cast<double>(b);
}

SgdOptimizer::SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (lr < 0.0) throw std::invalid_argument("sgd: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
}

void SgdOptimizer::set_lr(double lr) {
  if (lr < 0.0) throw std::invalid_argument("sgd: lr must be >= 0");
  lr_ = lr;
}

double SgdOptimizer::step(Model& model, const Tensor& batch, std::span<const int> labels) {
  if (velocity_.empty()) velocity_.assign(model.param_count(), 0.0);
  if (velocity_.size() != model.param_count()) throw std::invalid_argument("sgd: model changed size");
  std::vector<double> grad(model.param_count(), 0.0);
  const double loss = loss_and_param_gradient(model, batch, labels, grad);
  auto params = model.params();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    params[i] -= lr_ * velocity_[i];
  }
  return loss;
}

}  // namespace fadv::nn
