#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "premir/matrix.hpp"
#include "premir/network.hpp"

namespace premir {

// Bernoulli-Bernoulli RBM. weights is visible x hidden, row-major.
struct RbmParams {
  std::size_t n_visible = 0;
  std::size_t n_hidden = 0;
  std::vector<double> weights;
  std::vector<double> visible_bias;
  std::vector<double> hidden_bias;

  double w(std::size_t v, std::size_t h) const { return weights[v * n_hidden + h]; }
  bool operator==(const RbmParams&) const = default;
};

// Weights ~ N(0, 0.01^2), biases zero.
RbmParams make_rbm(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed);

// p(h_j = 1 | v) = sigmoid(b_h[j] + sum_i v_i W[i, j])
std::vector<double> rbm_hidden_probs(const RbmParams& rbm, std::span<const double> visible);
// p(v_i = 1 | h) = sigmoid(b_v[i] + sum_j W[i, j] h_j)
std::vector<double> rbm_visible_probs(const RbmParams& rbm, std::span<const double> hidden);

/// One CD-1 step on a minibatch (rows of `batch`, values in [0,1]):
/// h0 ~ p(h|v0), v1 = p(v|h0) (mean field), h1 = p(h|v1);
/// dW = eta (v0' p(h|v0) - v1' h1) / B, likewise for the biases.
/// Returns the mean squared reconstruction error of the batch before the
/// update. Throws NumericError if the update is non-finite.
double rbm_cd1_update(RbmParams& rbm, const Matrix& batch, double eta, std::uint64_t seed);

enum class OutputHead { softmax2, sigmoid1 };

std::string to_string(OutputHead head);
OutputHead parse_output_head(const std::string& text);

struct DbnPlan {
  std::vector<std::size_t> layer_sizes;  // input, then hidden layers
  OutputHead head = OutputHead::softmax2;

  std::size_t hidden_layers() const { return layer_sizes.size() - 1; }
  bool operator==(const DbnPlan&) const = default;
};

struct PretrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  std::vector<RbmParams> stack;
  // Mean reconstruction error per epoch, one series per layer.
  std::vector<std::vector<double>> reconstruction_error;
};

/// Greedy layer-wise pretraining: RBM k is trained on the hidden
/// probabilities of RBM k-1 (data for k = 0). Data must lie in [0,1].
PretrainResult dbn_pretrain(const DbnPlan& plan, const Matrix& data, const PretrainConfig& config);

// Hidden probabilities of every input row propagated through the stack.
Matrix dbn_propagate(std::span<const RbmParams> stack, const Matrix& data);

// Feed-forward spec of the unrolled stack: sigmoid dense layers then the head.
NetworkSpec dbn_network_spec(const DbnPlan& plan);

struct FinetuneConfig {
  TrainConfig train;
  // With train.epochs == 0 the stack is frozen and only the head is trained,
  // for head_epochs epochs.
  std::size_t head_epochs = 100;
};

/// Unrolls the pretrained stack into a feed-forward network with the
/// requested head and fine-tunes every weight by SGD on the cross-entropy.
Network dbn_finetune(std::span<const RbmParams> stack, const DbnPlan& plan, const Matrix& inputs,
                     std::span<const int> labels, const FinetuneConfig& config);

}  // namespace premir
