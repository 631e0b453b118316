#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "premir/errors.hpp"
#include "premir/models.hpp"
#include "premir/network.hpp"

using namespace premir;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.values) v = normal(rng);
  return t;
}

// Layer kinds that every gradient check should cover.
std::vector<NetworkSpec> gradient_cases() {
  using L = LayerSpec;
  std::vector<NetworkSpec> cases;
  cases.push_back({{3, 12}, {L::conv1d(4, 3, 1), L::max_pool(2, 2), L::dense(3, Activation::identity), L::softmax()}});
  cases.push_back({{2, 15}, {L::conv1d(3, 4, 3, Activation::identity), L::global_max_pool(), L::dense(2, Activation::identity), L::softmax()}});
  cases.push_back({{2, 10}, {L::conv1d(3, 3, 2, Activation::sigmoid), L::conv1d(2, 2, 1), L::dense(2, Activation::identity), L::softmax()}});
  cases.push_back({{6}, {L::dense(5, Activation::relu), L::dropout(0.3), L::dense(4, Activation::sigmoid), L::dense(3, Activation::identity), L::softmax()}});
  cases.push_back({{5}, {L::dense(4, Activation::sigmoid), L::dense(1, Activation::identity), L::sigmoid_output()}});
  cases.push_back({{4, 9}, {L::max_pool(3, 2), L::dense(2, Activation::identity), L::softmax()}});
  return cases;
}

}  // namespace

TEST(Conv, LengthFormula) {
  NetworkSpec spec{{4, 160}, {LayerSpec::conv1d(20, 18, 4), LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}};
  EXPECT_EQ(infer_shapes(spec)[0], (Shape{20, 36}));
}

TEST(Conv, IdentityFilterAndBias) {
  NetworkSpec spec{{1, 5}, {LayerSpec::conv1d(1, 1, 1, Activation::identity), LayerSpec::softmax()}};
  Network net(spec, 1);
  net.layer_weights(0)[0] = 1.0;
  net.layer_bias(0)[0] = 0.0;
  Tensor x({1, 5}, {0.1, -0.2, 0.3, 0.0, 0.5});
  net.forward(x);
  // Softmax of the identity conv output equals softmax of the input.
  EXPECT_EQ(net.output().values, softmax(x.values));

  net.layer_bias(0)[0] = 0.7;
  net.forward(Tensor({1, 5}));
  for (double p : net.output().values) EXPECT_NEAR(p, 0.2, 1e-15);
}

TEST(Conv, WindowTooLargeRejected) {
  NetworkSpec spec{{4, 10}, {LayerSpec::conv1d(2, 11, 1), LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}};
  EXPECT_THROW(infer_shapes(spec), UsageError);
  NetworkSpec pool{{1, 3}, {LayerSpec::max_pool(4, 1), LayerSpec::softmax()}};
  EXPECT_THROW(infer_shapes(pool), UsageError);
}

TEST(Pool, HandValues) {
  // Max pool [1,3,2,5] window 2 stride 2 -> [3,5]; read back through softmax.
  NetworkSpec spec{{1, 4}, {LayerSpec::max_pool(2, 2), LayerSpec::softmax()}};
  Network net(spec);
  net.forward(Tensor({1, 4}, {1, 3, 2, 5}));
  EXPECT_EQ(net.output().values, softmax(std::vector<double>{3, 5}));

  NetworkSpec global{{2, 3}, {LayerSpec::global_max_pool(), LayerSpec::softmax()}};
  Network g(global);
  g.forward(Tensor({2, 3}, {-1, -7, -2, 4, 4, 4}));
  EXPECT_EQ(g.output().values, softmax(std::vector<double>{-1, 4}));
  EXPECT_EQ(infer_shapes(global)[0], (Shape{2, 1}));
}

TEST(Pool, GradientGoesToFirstMax) {
  NetworkSpec spec{{1, 4}, {LayerSpec::global_max_pool(), LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}};
  Network net(spec, 3);
  net.forward(Tensor({1, 4}, {2, 5, 5, 1}));
  net.backward(std::vector<double>{1, 0});
  const auto& g = net.input_gradient().values;
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NE(g[1], 0.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_EQ(g[3], 0.0);
}

TEST(Dense, IdentityAndRelu) {
  NetworkSpec spec{{3}, {LayerSpec::dense(3, Activation::relu), LayerSpec::dense(3, Activation::identity), LayerSpec::softmax()}};
  Network net(spec);
  for (std::size_t layer : {0u, 1u}) {
    auto w = net.layer_weights(layer);
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  }
  net.forward(Tensor({3}, {-1.0, 2.0, 0.5}));
  EXPECT_EQ(net.output().values, softmax(std::vector<double>{0.0, 2.0, 0.5}));
}

TEST(Dense, ClosedFormGradient) {
  // One dense layer into softmax: dC/dW = (p - d) x^T, dC/db = p - d.
  NetworkSpec spec{{3}, {LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}};
  Network net(spec, 4);
  const Tensor x({3}, {0.3, -1.2, 2.0});
  const std::vector<double> d = {0.0, 1.0};
  net.zero_gradients();
  net.forward(x);
  net.backward(d);
  const auto p = net.output().values;
  const auto g = net.gradients();
  const auto& block = net.blocks()[0];
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(g[block.weight_offset + r * 3 + c], (p[r] - d[r]) * x[c], 1e-15);
    EXPECT_NEAR(g[block.bias_offset + r], p[r] - d[r], 1e-15);
  }
}

TEST(Softmax, Examples) {
  EXPECT_EQ(softmax(std::vector<double>{0, 0}), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(softmax(std::vector<double>{1000, 1000}), (std::vector<double>{0.5, 0.5}));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(2 + rng() % 8);
    for (auto& v : x) v = normal(rng);
    const auto p = softmax(x);
    double sum = 0.0;
    for (double v : p) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), std::max_element(x.begin(), x.end()) - x.begin());
    auto shifted = x;
    const double c = normal(rng);
    for (auto& v : shifted) v += c;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-9);
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 1}, std::vector<double>{0, 1}), 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 1}, std::vector<double>{1, 0}), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, SoftmaxGradientIsPMinusD) {
  // With a single softmax layer the input gradient is the logit gradient.
  NetworkSpec spec{{4}, {LayerSpec::softmax()}};
  Network net(spec);
  const Tensor z({4}, {0.2, -1.0, 3.0, 0.5});
  const std::vector<double> d = {0, 0, 1, 0};
  net.forward(z);
  net.backward(d);
  const auto p = softmax(z.values);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(net.input_gradient()[i], p[i] - d[i], 1e-15);
  auto fd = oracle::finite_difference_check(net, z, d, Mode::inference, 0);
  EXPECT_LT(fd.max_relative_error, 1e-4);
}

TEST(Backward, BeforeForwardThrows) {
  Network net({{3}, {LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}});
  EXPECT_THROW(net.backward(std::vector<double>{1, 0}), std::logic_error);
}

TEST(Gradients, FiniteDifferenceOracleEveryLayerKind) {
  std::mt19937_64 rng(7);
  for (const auto& spec : gradient_cases()) {
    for (int trial = 0; trial < 5; ++trial) {
      Network net(spec, rng());
      const Tensor x = random_tensor(spec.input_shape, rng);
      const auto target = one_hot_target(static_cast<int>(rng() % 2), net.output_size());
      for (Mode mode : {Mode::inference, Mode::train}) {
        const auto fd = oracle::finite_difference_check(net, x, target, mode, rng());
        EXPECT_GT(fd.checked, 0u);
        EXPECT_LT(fd.max_relative_error, 1e-4);
        const auto lib = check_gradients(net, x, target, mode, 11);
        EXPECT_LT(lib.max_relative_error, 1e-4);
      }
    }
  }
}

TEST(Gradients, PresetStacks) {
  std::mt19937_64 rng(8);
  const std::vector<std::pair<std::string, std::size_t>> presets = {{"best2", 20}, {"best3", 24}};
  for (const auto& [name, width] : presets) {
    const auto spec = build_cnn_preset(name, width);
    Network net(spec, rng());
    const Tensor x = random_tensor({4, width}, rng);
    const auto fd = oracle::finite_difference_check(net, x, one_hot_target(1, 2), Mode::train, 5);
    EXPECT_LT(fd.max_relative_error, 1e-4) << name;
    EXPECT_GT(fd.checked, net.parameter_count() / 2) << name;
  }
}

TEST(Dropout, ModesAndSurvivors) {
  const std::size_t n = 20000;
  NetworkSpec spec{{n}, {LayerSpec::dropout(0.3), LayerSpec::softmax()}};
  Network net(spec);
  const Tensor ones({n}, 1.0);
  net.forward(ones, Mode::inference);
  for (double p : net.output().values) EXPECT_NEAR(p, 1.0 / n, 1e-18);

  net.forward(ones, Mode::train, 9);
  const auto train_out = net.output().values;
  const double low = *std::min_element(train_out.begin(), train_out.end());
  std::size_t survivors = 0;
  for (double p : train_out) survivors += p > low * 1.5;
  const double frac = static_cast<double>(survivors) / n;
  EXPECT_NEAR(frac, 0.7, 0.05);
  // Survivors are scaled by 1/(1-p): their logit gap is exactly 1/0.7.
  const double high = *std::max_element(train_out.begin(), train_out.end());
  EXPECT_NEAR(std::log(high / low), 1.0 / 0.7, 1e-9);

  net.forward(ones, Mode::train, 9);
  EXPECT_EQ(net.output().values, train_out);

  NetworkSpec zero{{50}, {LayerSpec::dropout(0.0), LayerSpec::softmax()}};
  Network z(zero);
  Tensor x({50});
  for (std::size_t i = 0; i < 50; ++i) x[i] = static_cast<double>(i) / 10.0;
  z.forward(x, Mode::train, 3);
  EXPECT_EQ(z.output().values, softmax(x.values));
  EXPECT_THROW(infer_shapes({{3}, {LayerSpec::dropout(1.0), LayerSpec::softmax()}}), UsageError);
}

TEST(Dropout, InferenceGradientMatchesNoDropoutNet) {
  using L = LayerSpec;
  NetworkSpec with{{5}, {L::dense(4, Activation::relu), L::dropout(0.3), L::dense(2, Activation::identity), L::softmax()}};
  NetworkSpec without{{5}, {L::dense(4, Activation::relu), L::dense(2, Activation::identity), L::softmax()}};
  Network a(with, 2), b(without, 2);
  ASSERT_EQ(a.parameter_count(), b.parameter_count());
  std::copy(a.parameters().begin(), a.parameters().end(), b.parameters().begin());
  const Tensor x({5}, {0.5, -0.1, 0.9, 0.3, -0.7});
  const std::vector<double> d = {1, 0};
  a.zero_gradients();
  b.zero_gradients();
  a.forward(x, Mode::inference);
  b.forward(x, Mode::inference);
  a.backward(d);
  b.backward(d);
  EXPECT_TRUE(std::equal(a.gradients().begin(), a.gradients().end(), b.gradients().begin()));
}

TEST(Sgd, Examples) {
  std::vector<double> w = {1.0, -2.0};
  const std::vector<double> g = {0.5, 0.25};
  sgd_update(w, g, 0.0);
  EXPECT_EQ(w, (std::vector<double>{1.0, -2.0}));

  // C = w^2 at w = 1: gradient 2, step 0.1 -> 0.8.
  std::vector<double> q = {1.0};
  sgd_update(q, std::vector<double>{2.0 * q[0]}, 0.1);
  EXPECT_DOUBLE_EQ(q[0], 0.8);

  // Descent on C = 3 w^2 with eta below 2 / curvature shrinks |w| every step.
  double prev = std::abs(q[0]);
  for (int k = 0; k < 100; ++k) {
    sgd_update(q, std::vector<double>{6.0 * q[0]}, 0.3);
    EXPECT_LT(std::abs(q[0]), prev);
    prev = std::abs(q[0]);
  }

  std::vector<double> bad = {1.0};
  EXPECT_THROW(sgd_update(bad, std::vector<double>{std::nan("")}, 0.1), NumericError);
}

TEST(Training, SeparableToyLossDrops) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Tensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 200; ++i) {
    const int y = i % 2;
    Tensor x({4});
    for (std::size_t k = 0; k < 4; ++k) x[k] = normal(rng) * 0.3 + (y ? 1.0 : -1.0) * (k < 2 ? 1.0 : 0.0);
    xs.push_back(x);
    ys.push_back(y);
  }
  NetworkSpec spec{{4}, {LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}};
  Network net(spec, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  const auto hist = train_network(net, xs, ys, cfg);
  ASSERT_EQ(hist.epoch_loss.size(), 50u);

  Network fresh(spec, 1);
  double initial = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fresh.forward(xs[i]);
    initial += fresh.loss(one_hot_target(ys[i], 2)) / xs.size();
  }
  EXPECT_LT(hist.epoch_loss.back(), 0.1 * initial);

  Network again(spec, 1);
  const auto hist2 = train_network(again, xs, ys, cfg);
  EXPECT_EQ(hist.epoch_loss, hist2.epoch_loss);
  EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(), again.parameters().begin()));
}

TEST(Training, DivergenceReportsEpoch) {
  // Identical inputs with opposite labels keep the gradient non-zero, so a
  // huge step overflows the weights.
  std::vector<Tensor> xs = {Tensor({2}, {1.0, 1.0}), Tensor({2}, {1.0, 1.0})};
  std::vector<int> ys = {0, 1};
  Network net({{2}, {LayerSpec::dense(2, Activation::identity), LayerSpec::softmax()}}, 1);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e308;
  cfg.epochs = 5;
  try {
    train_network(net, xs, ys, cfg);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Shapes, Best2Contract) {
  const auto spec = build_cnn_preset("best2");
  const auto shapes = infer_shapes(spec);
  EXPECT_EQ(shapes[0], (Shape{20, 36}));
  EXPECT_EQ(shapes[1], (Shape{90}));
  EXPECT_EQ(shapes.back(), (Shape{2}));
  Network net(spec, 1);
  // Flattened 20 x 36 = 720 inputs feed the 90-unit layer.
  EXPECT_EQ(net.blocks()[1].weight_count, 720u * 90u);
  net.forward(Tensor({4, 160}));
}
