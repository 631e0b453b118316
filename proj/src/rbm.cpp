#include "premir/rbm.hpp"

#include <cmath>
#include <random>

#include "premir/errors.hpp"
#include "premir/random.hpp"

namespace premir {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_unit_interval(const Matrix& data) {
  for (double v : data.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("RBM input values must lie in [0, 1]");
  }
}

std::vector<Tensor> rows_as_tensors(const Matrix& m) {
  std::vector<Tensor> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.emplace_back(Shape{m.cols()}, std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return out;
}

}  // namespace

std::string to_string(OutputHead head) { return head == OutputHead::sigmoid1 ? "sigmoid1" : "softmax2"; }

OutputHead parse_output_head(const std::string& text) {
  if (text == "softmax2") return OutputHead::softmax2;
  if (text == "sigmoid1") return OutputHead::sigmoid1;
  throw UsageError("unknown output head '" + text + "' (expected softmax2 or sigmoid1)");
}

RbmParams make_rbm(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed) {
  if (n_visible == 0 || n_hidden == 0) throw UsageError("RBM layer sizes must be positive");
  RbmParams rbm{n_visible, n_hidden, std::vector<double>(n_visible * n_hidden),
                std::vector<double>(n_visible, 0.0), std::vector<double>(n_hidden, 0.0)};
  Rng rng(derive_seed(seed, stream::kRbm));
  std::normal_distribution<double> normal(0.0, 0.01);
  for (double& w : rbm.weights) w = normal(rng);
  return rbm;
}

std::vector<double> rbm_hidden_probs(const RbmParams& rbm, std::span<const double> visible) {
  if (visible.size() != rbm.n_visible) throw DataError("visible vector has the wrong dimension");
  std::vector<double> act(rbm.hidden_bias);
  for (std::size_t i = 0; i < rbm.n_visible; ++i) {
    const double v = visible[i];
    if (v == 0.0) continue;
    const double* row = rbm.weights.data() + i * rbm.n_hidden;
    for (std::size_t j = 0; j < rbm.n_hidden; ++j) act[j] += v * row[j];
  }
  for (double& a : act) a = sigmoid(a);
  return act;
}

std::vector<double> rbm_visible_probs(const RbmParams& rbm, std::span<const double> hidden) {
  if (hidden.size() != rbm.n_hidden) throw DataError("hidden vector has the wrong dimension");
  std::vector<double> act(rbm.visible_bias);
  for (std::size_t i = 0; i < rbm.n_visible; ++i) {
    const double* row = rbm.weights.data() + i * rbm.n_hidden;
    double s = 0.0;
    for (std::size_t j = 0; j < rbm.n_hidden; ++j) s += row[j] * hidden[j];
    act[i] = sigmoid(act[i] + s);
  }
  return act;
}

double rbm_cd1_update(RbmParams& rbm, const Matrix& batch, double eta, std::uint64_t seed) {
  if (batch.empty()) return 0.0;
  if (batch.cols() != rbm.n_visible) throw DataError("batch width does not match the RBM");
  const std::size_t nv = rbm.n_visible;
  const std::size_t nh = rbm.n_hidden;
  std::vector<double> dw(nv * nh, 0.0);
  std::vector<double> dbv(nv, 0.0);
  std::vector<double> dbh(nh, 0.0);
  std::vector<double> h_sample(nh);
  Rng rng(derive_seed(seed, stream::kRbm, 1));
  double error = 0.0;

  for (std::size_t r = 0; r < batch.rows(); ++r) {
    auto v0 = batch.row(r);
    const auto h0 = rbm_hidden_probs(rbm, v0);
    for (std::size_t j = 0; j < nh; ++j) h_sample[j] = uniform01(rng) < h0[j] ? 1.0 : 0.0;
    const auto v1 = rbm_visible_probs(rbm, h_sample);
    const auto h1 = rbm_hidden_probs(rbm, v1);
    for (std::size_t i = 0; i < nv; ++i) {
      double* row = dw.data() + i * nh;
      for (std::size_t j = 0; j < nh; ++j) row[j] += v0[i] * h0[j] - v1[i] * h1[j];
      dbv[i] += v0[i] - v1[i];
      error += (v0[i] - v1[i]) * (v0[i] - v1[i]);
    }
    for (std::size_t j = 0; j < nh; ++j) dbh[j] += h0[j] - h1[j];
  }

  const double scale = eta / static_cast<double>(batch.rows());
  for (std::size_t k = 0; k < dw.size(); ++k) {
    const double d = scale * dw[k];
    if (!std::isfinite(d)) throw NumericError("non-finite RBM weight update");
    rbm.weights[k] += d;
  }
  for (std::size_t i = 0; i < nv; ++i) rbm.visible_bias[i] += scale * dbv[i];
  for (std::size_t j = 0; j < nh; ++j) rbm.hidden_bias[j] += scale * dbh[j];
  return error / static_cast<double>(batch.rows() * nv);
}

PretrainResult dbn_pretrain(const DbnPlan& plan, const Matrix& data, const PretrainConfig& config) {
  if (plan.layer_sizes.size() < 2) throw UsageError("DBN plan needs at least one hidden layer");
  if (data.cols() != plan.layer_sizes.front()) throw DataError("data width does not match the DBN input");
  if (config.batch_size == 0) throw UsageError("batch size must be >= 1");
  check_unit_interval(data);

  PretrainResult result;
  Matrix layer_input = data;
  std::vector<std::size_t> order(data.rows());
  for (std::size_t layer = 0; layer + 1 < plan.layer_sizes.size(); ++layer) {
    const std::uint64_t layer_seed = derive_seed(config.seed, stream::kRbm, layer);
    RbmParams rbm = make_rbm(plan.layer_sizes[layer], plan.layer_sizes[layer + 1], layer_seed);
    std::vector<double> errors;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(layer_seed, stream::kMinibatch, epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      double sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        const Matrix batch = layer_input.select_rows(std::span(order).subspan(start, end - start));
        sum += rbm_cd1_update(rbm, batch, config.learning_rate,
                              derive_seed(layer_seed, epoch, batches));
        ++batches;
      }
      errors.push_back(batches ? sum / static_cast<double>(batches) : 0.0);
    }
    layer_input = dbn_propagate(std::span(&rbm, 1), layer_input);
    result.stack.push_back(std::move(rbm));
    result.reconstruction_error.push_back(std::move(errors));
  }
  return result;
}

Matrix dbn_propagate(std::span<const RbmParams> stack, const Matrix& data) {
  Matrix cur = data;
  for (const auto& rbm : stack) {
    Matrix next(cur.rows(), rbm.n_hidden);
    for (std::size_t r = 0; r < cur.rows(); ++r) {
      const auto h = rbm_hidden_probs(rbm, cur.row(r));
      std::copy(h.begin(), h.end(), next.row(r).begin());
    }
    cur = std::move(next);
  }
  return cur;
}

NetworkSpec dbn_network_spec(const DbnPlan& plan) {
  if (plan.layer_sizes.size() < 2) throw UsageError("DBN plan needs at least one hidden layer");
  for (auto s : plan.layer_sizes) {
    if (s == 0) throw UsageError("DBN layer sizes must be positive");
  }
  NetworkSpec spec;
  spec.input_shape = {plan.layer_sizes.front()};
  for (std::size_t k = 1; k < plan.layer_sizes.size(); ++k) {
    spec.layers.push_back(LayerSpec::dense(plan.layer_sizes[k], Activation::sigmoid));
  }
  if (plan.head == OutputHead::sigmoid1) {
    spec.layers.push_back(LayerSpec::dense(1, Activation::identity));
    spec.layers.push_back(LayerSpec::sigmoid_output());
  } else {
    spec.layers.push_back(LayerSpec::dense(2, Activation::identity));
    spec.layers.push_back(LayerSpec::softmax());
  }
  return spec;
}

Network dbn_finetune(std::span<const RbmParams> stack, const DbnPlan& plan, const Matrix& inputs,
                     std::span<const int> labels, const FinetuneConfig& config) {
  if (stack.size() != plan.hidden_layers()) throw DataError("pretrained stack does not match the DBN plan");
  NetworkSpec spec = dbn_network_spec(plan);
  const bool frozen = config.train.epochs == 0;
  for (std::size_t k = 0; k < stack.size(); ++k) spec.layers[k].frozen = frozen;

  Network net(spec, config.train.seed);
  for (std::size_t k = 0; k < stack.size(); ++k) {
    const auto& rbm = stack[k];
    if (rbm.n_visible != plan.layer_sizes[k] || rbm.n_hidden != plan.layer_sizes[k + 1]) {
      throw DataError("RBM " + std::to_string(k) + " does not match the DBN plan");
    }
    // Dense weights are [out, in]; RBM weights are [visible, hidden].
    auto w = net.layer_weights(k);
    for (std::size_t h = 0; h < rbm.n_hidden; ++h) {
      for (std::size_t v = 0; v < rbm.n_visible; ++v) w[h * rbm.n_visible + v] = rbm.w(v, h);
    }
    auto b = net.layer_bias(k);
    std::copy(rbm.hidden_bias.begin(), rbm.hidden_bias.end(), b.begin());
  }

  const auto tensors = rows_as_tensors(inputs);
  TrainConfig train = config.train;
  if (frozen) train.epochs = config.head_epochs;
  train_network(net, tensors, labels, train);
  return net;
}

}  // namespace premir
