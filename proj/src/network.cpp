#include "premir/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "premir/errors.hpp"
#include "premir/kernels.hpp"
#include "premir/random.hpp"

namespace premir {

namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(Activation act, double z) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return sigmoid(z);
    default: return z;
  }
}

double activation_slope(Activation act, double z, double y) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    default: return 1.0;
  }
}

bool is_output(LayerKind k) { return k == LayerKind::softmax || k == LayerKind::sigmoid_output; }

std::string where(std::size_t layer) { return "layer " + std::to_string(layer) + ": "; }

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::global_max_pool: return "global_max_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
    case LayerKind::sigmoid_output: return "sigmoid_output";
  }
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& text) {
  for (auto k : {LayerKind::conv1d, LayerKind::max_pool, LayerKind::global_max_pool, LayerKind::dense,
                 LayerKind::dropout, LayerKind::softmax, LayerKind::sigmoid_output}) {
    if (to_string(k) == text) return k;
  }
  throw DataError("unknown layer kind '" + text + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    default: return "identity";
  }
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "sigmoid") return Activation::sigmoid;
  if (text == "identity") return Activation::identity;
  throw DataError("unknown activation '" + text + "'");
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t window, std::size_t stride, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.filters = filters;
  s.window = window;
  s.stride = stride;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::max_pool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::global_max_pool() {
  LayerSpec s;
  s.kind = LayerKind::global_max_pool;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

LayerSpec LayerSpec::sigmoid_output() {
  LayerSpec s;
  s.kind = LayerKind::sigmoid_output;
  return s;
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0) {
    throw UsageError("network input shape must be non-empty");
  }
  if (spec.layers.empty()) throw UsageError("network has no layers");
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (is_output(l.kind) && i + 1 != spec.layers.size()) {
      throw UsageError(where(i) + to_string(l.kind) + " must be the last layer");
    }
    switch (l.kind) {
      case LayerKind::conv1d: {
        if (cur.size() != 2) throw UsageError(where(i) + "conv1d needs a [channels, length] input");
        if (l.filters < 1) throw UsageError(where(i) + "conv1d needs at least one filter");
        if (l.stride < 1) throw UsageError(where(i) + "conv1d stride must be >= 1");
        if (l.window < 1 || l.window > cur[1]) {
          throw UsageError(where(i) + "conv1d window " + std::to_string(l.window) +
                           " does not fit input length " + std::to_string(cur[1]));
        }
        cur = {l.filters, (cur[1] - l.window) / l.stride + 1};
        break;
      }
      case LayerKind::max_pool: {
        if (cur.size() != 2) throw UsageError(where(i) + "max_pool needs a [channels, length] input");
        if (l.stride < 1) throw UsageError(where(i) + "max_pool stride must be >= 1");
        if (l.window < 1 || l.window > cur[1]) {
          throw UsageError(where(i) + "max_pool window " + std::to_string(l.window) +
                           " does not fit input length " + std::to_string(cur[1]));
        }
        cur = {cur[0], (cur[1] - l.window) / l.stride + 1};
        break;
      }
      case LayerKind::global_max_pool:
        if (cur.size() != 2) throw UsageError(where(i) + "global_max_pool needs a [channels, length] input");
        cur = {cur[0], 1};
        break;
      case LayerKind::dense:
        if (l.units < 1) throw UsageError(where(i) + "dense layer needs at least one unit");
        cur = {l.units};
        break;
      case LayerKind::dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) throw UsageError(where(i) + "dropout rate must be in [0, 1)");
        break;
      case LayerKind::softmax:
        if (shape_size(cur) < 2) throw UsageError(where(i) + "softmax needs at least two inputs");
        cur = {shape_size(cur)};
        break;
      case LayerKind::sigmoid_output:
        if (shape_size(cur) != 1) throw UsageError(where(i) + "sigmoid output needs exactly one input");
        cur = {1};
        break;
    }
    shapes.push_back(cur);
  }
  if (!is_output(spec.layers.back().kind)) {
    throw UsageError("network must end in a softmax or sigmoid_output layer");
  }
  return shapes;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(std::span<const double> p, std::span<const double> d) {
  double c = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (d[j] != 0.0) c -= d[j] * std::log(std::max(p[j], kProbFloor));
  }
  return c;
}

std::vector<double> one_hot_target(int label, std::size_t output_size) {
  if (output_size == 1) return {static_cast<double>(label)};
  std::vector<double> t(output_size, 0.0);
  t.at(static_cast<std::size_t>(label)) = 1.0;
  return t;
}

// ---------------------------------------------------------------------------

Network::Network(NetworkSpec spec, std::uint64_t init_seed)
    : spec_(std::move(spec)), shapes_(infer_shapes(spec_)) {
  Shape in = spec_.input_shape;
  std::size_t offset = 0;
  blocks_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    auto& b = blocks_[i];
    if (l.kind == LayerKind::conv1d) {
      b.weight_count = l.filters * in[0] * l.window;
      b.bias_count = l.filters;
    } else if (l.kind == LayerKind::dense) {
      b.weight_count = l.units * shape_size(in);
      b.bias_count = l.units;
    }
    b.weight_offset = offset;
    b.bias_offset = offset + b.weight_count;
    offset += b.weight_count + b.bias_count;
    in = shapes_[i];
  }
  params_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);

  Rng rng(derive_seed(init_seed, stream::kWeightInit));
  in = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    double fan_in = 0.0;
    double fan_out = 0.0;
    if (l.kind == LayerKind::conv1d) {
      fan_in = static_cast<double>(in[0] * l.window);
      fan_out = static_cast<double>(l.filters * l.window);
    } else if (l.kind == LayerKind::dense) {
      fan_in = static_cast<double>(shape_size(in));
      fan_out = static_cast<double>(l.units);
    }
    if (blocks_[i].weight_count > 0) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& w : layer_weights(i)) w = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    in = shapes_[i];
  }
  cache_.resize(spec_.layers.size());
}

void Network::zero_gradients() { std::fill(grads_.begin(), grads_.end(), 0.0); }

std::span<double> Network::layer_weights(std::size_t layer) {
  return std::span<double>(params_).subspan(blocks_[layer].weight_offset, blocks_[layer].weight_count);
}

std::span<double> Network::layer_bias(std::size_t layer) {
  return std::span<double>(params_).subspan(blocks_[layer].bias_offset, blocks_[layer].bias_count);
}

const Tensor& Network::output() const {
  if (!has_forward_) throw std::logic_error("network output requested before forward()");
  return cache_.back().out;
}

const Tensor& Network::forward(const Tensor& input, Mode mode, std::uint64_t dropout_seed) {
  if (input.shape != spec_.input_shape && shape_size(input.shape) != shape_size(spec_.input_shape)) {
    throw DataError("network input has " + std::to_string(input.size()) + " values, expected " +
                    std::to_string(shape_size(spec_.input_shape)));
  }
  Tensor cur(spec_.input_shape, input.values);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    auto& c = cache_[i];
    c.input = cur;
    const Shape& out_shape = shapes_[i];
    const std::span<const double> w = std::span<const double>(params_).subspan(
        blocks_[i].weight_offset, blocks_[i].weight_count);
    const std::span<const double> b = std::span<const double>(params_).subspan(
        blocks_[i].bias_offset, blocks_[i].bias_count);
    switch (l.kind) {
      case LayerKind::conv1d: {
        kernels::ConvShape cs{cur.shape[0], cur.shape[1], l.filters, l.window, l.stride};
        c.pre = Tensor(out_shape);
        kernels::conv1d_forward(cs, cur.values, w, b, c.pre.values);
        c.out = Tensor(out_shape);
        for (std::size_t k = 0; k < c.pre.size(); ++k) c.out[k] = activate(l.activation, c.pre[k]);
        break;
      }
      case LayerKind::dense: {
        c.pre = Tensor(out_shape);
        kernels::dense_forward(l.units, cur.size(), cur.values, w, b, c.pre.values);
        c.out = Tensor(out_shape);
        for (std::size_t k = 0; k < c.pre.size(); ++k) c.out[k] = activate(l.activation, c.pre[k]);
        break;
      }
      case LayerKind::max_pool:
      case LayerKind::global_max_pool: {
        const std::size_t channels = cur.shape[0];
        const std::size_t len = cur.shape[1];
        const std::size_t window = l.kind == LayerKind::max_pool ? l.window : len;
        const std::size_t stride = l.kind == LayerKind::max_pool ? l.stride : 1;
        const std::size_t lo = out_shape[1];
        c.out = Tensor(out_shape);
        c.argmax.assign(channels * lo, 0);
        for (std::size_t ch = 0; ch < channels; ++ch) {
          for (std::size_t t = 0; t < lo; ++t) {
            std::size_t best = ch * len + t * stride;
            for (std::size_t k = 1; k < window; ++k) {
              const std::size_t idx = ch * len + t * stride + k;
              if (cur[idx] > cur[best]) best = idx;  // first index wins ties
            }
            c.argmax[ch * lo + t] = best;
            c.out[ch * lo + t] = cur[best];
          }
        }
        break;
      }
      case LayerKind::dropout: {
        c.out = cur;
        c.dropout_active = mode == Mode::train && l.rate > 0.0;
        if (c.dropout_active) {
          Rng rng(derive_seed(dropout_seed, stream::kDropout, i));
          const double keep_scale = 1.0 / (1.0 - l.rate);
          c.mask.resize(cur.size());
          for (std::size_t k = 0; k < cur.size(); ++k) {
            c.mask[k] = uniform01(rng) < l.rate ? 0.0 : keep_scale;
            c.out[k] *= c.mask[k];
          }
        }
        break;
      }
      case LayerKind::softmax: {
        c.out = Tensor(out_shape, softmax(cur.values));
        break;
      }
      case LayerKind::sigmoid_output: {
        c.out = Tensor(out_shape, {sigmoid(cur[0])});
        break;
      }
    }
    cur = c.out;
  }
  has_forward_ = true;
  return cache_.back().out;
}

double Network::loss(std::span<const double> target) const {
  const auto& p = output().values;
  if (spec_.layers.back().kind == LayerKind::sigmoid_output) {
    const double q = std::clamp(p[0], kProbFloor, 1.0 - kProbFloor);
    return -(target[0] * std::log(q) + (1.0 - target[0]) * std::log(1.0 - q));
  }
  return cross_entropy(p, target);
}

double Network::backward(std::span<const double> target) {
  if (!has_forward_) throw std::logic_error("backward() called before forward()");
  if (target.size() != output_size()) throw DataError("target size does not match network output");
  const double value = loss(target);

  // Output layers fuse with their loss: dLoss/dlogit = p - d.
  Tensor grad(cache_.back().input.shape);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = cache_.back().out[k] - target[k];

  for (std::size_t ii = spec_.layers.size() - 1; ii-- > 0;) {
    const auto& l = spec_.layers[ii];
    auto& c = cache_[ii];
    Tensor grad_in(c.input.shape, 0.0);
    switch (l.kind) {
      case LayerKind::conv1d: {
        const std::size_t channels = c.input.shape[0];
        const std::size_t len = c.input.shape[1];
        const std::size_t filters = l.filters;
        const std::size_t lo = c.out.shape[1];
        const auto& blk = blocks_[ii];
        const double* w = params_.data() + blk.weight_offset;
        double* gw = grads_.data() + blk.weight_offset;
        double* gb = grads_.data() + blk.bias_offset;
        for (std::size_t f = 0; f < filters; ++f) {
          for (std::size_t t = 0; t < lo; ++t) {
            const std::size_t o = f * lo + t;
            const double dz = grad[o] * activation_slope(l.activation, c.pre[o], c.out[o]);
            if (dz == 0.0) continue;
            if (!l.frozen) gb[f] += dz;
            for (std::size_t ch = 0; ch < channels; ++ch) {
              const std::size_t wrow = (f * channels + ch) * l.window;
              const std::size_t xrow = ch * len + t * l.stride;
              for (std::size_t k = 0; k < l.window; ++k) {
                if (!l.frozen) gw[wrow + k] += dz * c.input[xrow + k];
                grad_in[xrow + k] += w[wrow + k] * dz;
              }
            }
          }
        }
        break;
      }
      case LayerKind::dense: {
        const std::size_t rows = l.units;
        const std::size_t cols = c.input.size();
        const auto& blk = blocks_[ii];
        const double* w = params_.data() + blk.weight_offset;
        double* gw = grads_.data() + blk.weight_offset;
        double* gb = grads_.data() + blk.bias_offset;
        for (std::size_t r = 0; r < rows; ++r) {
          const double dz = grad[r] * activation_slope(l.activation, c.pre[r], c.out[r]);
          if (dz == 0.0) continue;
          if (!l.frozen) {
            gb[r] += dz;
            for (std::size_t q = 0; q < cols; ++q) gw[r * cols + q] += dz * c.input[q];
          }
          for (std::size_t q = 0; q < cols; ++q) grad_in[q] += w[r * cols + q] * dz;
        }
        break;
      }
      case LayerKind::max_pool:
      case LayerKind::global_max_pool:
        for (std::size_t k = 0; k < c.argmax.size(); ++k) grad_in[c.argmax[k]] += grad[k];
        break;
      case LayerKind::dropout:
        for (std::size_t k = 0; k < grad.size(); ++k) {
          grad_in[k] = c.dropout_active ? grad[k] * c.mask[k] : grad[k];
        }
        break;
      case LayerKind::softmax:
      case LayerKind::sigmoid_output:
        throw std::logic_error("output layer in the middle of a network");
    }
    grad = std::move(grad_in);
  }
  input_grad_ = Tensor(spec_.input_shape, std::move(grad.values));
  return value;
}

std::uint64_t Network::activation_pattern() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    const auto& c = cache_[i];
    if ((l.kind == LayerKind::conv1d || l.kind == LayerKind::dense) && l.activation == Activation::relu) {
      for (std::size_t k = 0; k < c.pre.size(); ++k) mix(c.pre[k] > 0.0 ? 2 * k + 1 : 2 * k);
    }
    for (auto a : c.argmax) mix(a);
  }
  return h;
}

// ---------------------------------------------------------------------------

void sgd_update(std::span<double> params, std::span<const double> grads, double eta) {
  if (params.size() != grads.size()) throw DataError("parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient at parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta * grads[i];
}

TrainHistory train_network(Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                           const TrainConfig& config) {
  if (inputs.size() != labels.size()) throw DataError("inputs/labels size mismatch");
  if (inputs.empty()) throw DataError("cannot train on an empty set");
  if (config.batch_size == 0) throw UsageError("batch size must be >= 1");

  TrainHistory history;
  const std::size_t n = inputs.size();
  const std::size_t out = net.output_size();
  std::vector<std::size_t> order(n);
  std::vector<double> velocity(net.parameter_count(), 0.0);
  std::vector<double> step(net.parameter_count(), 0.0);

  // Frozen layers keep their parameters; mask them out of every update.
  std::vector<char> trainable(net.parameter_count(), 1);
  for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
    if (!net.spec().layers[i].frozen) continue;
    const auto& b = net.blocks()[i];
    std::fill_n(trainable.begin() + static_cast<std::ptrdiff_t>(b.weight_offset),
                b.weight_count + b.bias_count, 0);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, stream::kMinibatch, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      net.zero_gradients();
      for (std::size_t p = start; p < end; ++p) {
        const std::size_t idx = order[p];
        net.forward(inputs[idx], Mode::train,
                    derive_seed(config.seed, stream::kDropout, epoch * n + p));
        epoch_loss += net.backward(one_hot_target(labels[idx], out));
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      auto grads = net.gradients();
      for (std::size_t k = 0; k < grads.size(); ++k) grads[k] = trainable[k] ? grads[k] * inv : 0.0;
      try {
        if (config.momentum > 0.0) {
          for (std::size_t k = 0; k < step.size(); ++k) {
            velocity[k] = config.momentum * velocity[k] + grads[k];
            step[k] = velocity[k];
          }
          sgd_update(net.parameters(), step, config.learning_rate);
        } else {
          sgd_update(net.parameters(), grads, config.learning_rate);
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    history.epoch_loss.push_back(epoch_loss);
  }
  net.zero_gradients();
  return history;
}

std::vector<double> predict_positive(Network& net, std::span<const Tensor> inputs) {
  std::vector<double> scores;
  scores.reserve(inputs.size());
  for (const auto& x : inputs) {
    const auto& p = net.forward(x, Mode::inference);
    scores.push_back(p.size() == 1 ? p[0] : p[1]);
  }
  return scores;
}

GradientCheck check_gradients(Network& net, const Tensor& input, std::span<const double> target,
                              Mode mode, std::uint64_t dropout_seed, double step) {
  GradientCheck result;
  net.zero_gradients();
  net.forward(input, mode, dropout_seed);
  const std::uint64_t pattern = net.activation_pattern();
  net.backward(target);
  const std::vector<double> analytic(net.gradients().begin(), net.gradients().end());
  const Tensor analytic_input = net.input_gradient();

  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  auto probe = [&](double& slot, double expected) {
    const double saved = slot;
    slot = saved + step;
    net.forward(input, mode, dropout_seed);
    const double up = net.loss(target);
    const bool up_ok = net.activation_pattern() == pattern;
    slot = saved - step;
    net.forward(input, mode, dropout_seed);
    const double down = net.loss(target);
    const bool down_ok = net.activation_pattern() == pattern;
    slot = saved;
    if (!up_ok || !down_ok) {
      ++result.skipped;
      return;
    }
    const double numeric = (up - down) / (2.0 * step);
    result.max_relative_error = std::max(result.max_relative_error, rel(expected, numeric));
    ++result.checked;
  };

  const auto& layers = net.spec().layers;
  auto params = net.parameters();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].frozen) continue;
    const auto& b = net.blocks()[i];
    for (std::size_t k = b.weight_offset; k < b.bias_offset + b.bias_count; ++k) probe(params[k], analytic[k]);
  }
  Tensor x = input;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    auto probe_input = [&](double delta) {
      x[k] = saved + delta;
      net.forward(x, mode, dropout_seed);
      return std::pair{net.loss(target), net.activation_pattern() == pattern};
    };
    auto [up, up_ok] = probe_input(step);
    auto [down, down_ok] = probe_input(-step);
    x[k] = saved;
    if (!up_ok || !down_ok) {
      ++result.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    result.max_relative_error = std::max(result.max_relative_error, rel(analytic_input[k], numeric));
    ++result.checked;
  }
  net.zero_gradients();
  net.forward(input, mode, dropout_seed);
  return result;
}

}  // namespace premir
