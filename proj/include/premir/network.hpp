#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "premir/tensor.hpp"

namespace premir {

enum class LayerKind { conv1d, max_pool, global_max_pool, dense, dropout, softmax, sigmoid_output };
enum class Activation { identity, relu, sigmoid };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);
std::string to_string(Activation act);
Activation parse_activation(const std::string& text);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t filters = 0;  // conv1d
  std::size_t window = 0;   // conv1d, max_pool
  std::size_t stride = 1;   // conv1d, max_pool
  std::size_t units = 0;    // dense
  double rate = 0.0;        // dropout
  Activation activation = Activation::identity;
  bool frozen = false;      // excluded from parameter updates

  static LayerSpec conv1d(std::size_t filters, std::size_t window, std::size_t stride,
                          Activation act = Activation::relu);
  static LayerSpec max_pool(std::size_t window, std::size_t stride);
  static LayerSpec global_max_pool();
  static LayerSpec dense(std::size_t units, Activation act);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax();
  static LayerSpec sigmoid_output();

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

/// Output shape of every layer in order. Throws UsageError on any shape or
/// parameter violation (window larger than input, zero stride, dropout rate
/// outside [0,1), an output layer that is not last, ...).
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

enum class Mode { train, inference };

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);
// -sum d_j log p_j with p clamped to >= 1e-12.
double cross_entropy(std::span<const double> p, std::span<const double> d);

struct ParamBlock {
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

class Network {
 public:
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  explicit Network(NetworkSpec spec, std::uint64_t init_seed = 1);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t output_size() const { return shape_size(shapes_.back()); }

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> gradients() { return grads_; }
  std::span<const double> gradients() const { return grads_; }
  void zero_gradients();
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::span<double> layer_weights(std::size_t layer);
  std::span<double> layer_bias(std::size_t layer);

  // Runs every layer and caches what backward() needs. Dropout masks are a
  // pure function of dropout_seed.
  const Tensor& forward(const Tensor& input, Mode mode = Mode::inference,
                        std::uint64_t dropout_seed = 0);
  const Tensor& output() const;

  // Loss of the cached output (cross-entropy, or binary cross-entropy for a
  // sigmoid output).
  double loss(std::span<const double> target) const;

  /// Adds dLoss/dparam for the cached forward pass to gradients() and returns
  /// the loss. Frozen layers receive no gradient. Throws std::logic_error
  /// when called before forward().
  double backward(std::span<const double> target);
  const Tensor& input_gradient() const { return input_grad_; }

  // Hash of ReLU signs and pooling argmax choices from the last forward pass;
  // changes exactly when a perturbation crosses a non-differentiable point.
  std::uint64_t activation_pattern() const;

 private:
  struct Cache {
    Tensor input;
    Tensor pre;   // pre-activation (conv1d, dense)
    Tensor out;
    std::vector<std::size_t> argmax;  // pooling
    std::vector<double> mask;         // dropout scale per unit
    bool dropout_active = false;
  };

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::vector<Cache> cache_;
  Tensor input_grad_;
  bool has_forward_ = false;
};

std::vector<double> one_hot_target(int label, std::size_t output_size);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double momentum = 0.0;
  std::uint64_t seed = 1;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
};

/// params <- params - eta * grads. Throws NumericError if any gradient is
/// non-finite.
void sgd_update(std::span<double> params, std::span<const double> grads, double eta);

/// Minibatch SGD on the cross-entropy loss with seeded shuffling. Gradients
/// are averaged over each minibatch. Throws NumericError naming the epoch if
/// the loss becomes non-finite.
TrainHistory train_network(Network& net, std::span<const Tensor> inputs, std::span<const int> labels,
                           const TrainConfig& config);

// Class-1 score for every input: p[1] for softmax heads, p for a sigmoid head.
std::vector<double> predict_positive(Network& net, std::span<const Tensor> inputs);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation crossed a kink
};

/// Compares backward() against central finite differences on every parameter
/// and input coordinate. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheck check_gradients(Network& net, const Tensor& input, std::span<const double> target,
                              Mode mode = Mode::inference, std::uint64_t dropout_seed = 0,
                              double step = 1e-5);

}  // namespace premir
