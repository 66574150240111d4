#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ildmap/gradcheck.hpp"
#include "ildmap/neuralnet.hpp"

using namespace ildmap;

namespace {
std::vector<double> v(std::initializer_list<double> xs) { return xs; }
}  // namespace

TEST(Network, ParameterCounts) {
  RngStream rng(1);
  EXPECT_EQ(student_architecture(rng).parameter_count(), 66561u);
  EXPECT_EQ(critic_architecture(rng).parameter_count(), 66817u);
}

TEST(Network, ZeroNetOutputsZero) {
  const Network net = Network::zeros({{1, 4, Activation::relu}, {4, 1, Activation::identity}});
  EXPECT_EQ(net.predict(v({3.0}))[0], 0.0);
}

TEST(Network, IdentityLayerPassesInput) {
  Network net = Network::zeros({{2, 2, Activation::identity}});
  net.mutable_layer(0).weight(0, 0) = 1.0;
  net.mutable_layer(0).weight(1, 1) = 1.0;
  EXPECT_EQ(net.predict(v({-1.5, 4.0})), v({-1.5, 4.0}));
}

// Hand-unrolled: h = relu(W1 x + b1), y = w2 . h + b2.
TEST(Network, HandBuiltTwoLayer) {
  Network net = Network::zeros({{1, 3, Activation::relu}, {3, 1, Activation::identity}});
  auto& l1 = net.mutable_layer(0);
  l1.weights = {0.5, -2.0, 1.5};
  l1.biases = {0.25, 1.0, -3.0};
  auto& l2 = net.mutable_layer(1);
  l2.weights = {2.0, 3.0, -1.0};
  l2.biases = {0.125};
  const double h0 = std::max(0.0, 0.5 * 1.0 + 0.25);
  const double h1 = std::max(0.0, -2.0 * 1.0 + 1.0);
  const double h2 = std::max(0.0, 1.5 * 1.0 - 3.0);
  EXPECT_DOUBLE_EQ(net.predict_scalar(v({1.0})), 2.0 * h0 + 3.0 * h1 - 1.0 * h2 + 0.125);
  EXPECT_DOUBLE_EQ(net.predict_scalar(v({1.0})), 1.625);
}

TEST(Network, ReluOnInputZeroesNegativeInputs) {
  Network net = Network::zeros({{1, 1, Activation::identity}}, 0.0, InputMode::relu_on_input);
  net.mutable_layer(0).weights = {2.0};
  EXPECT_EQ(net.predict_scalar(v({-3.0})), 0.0);
  EXPECT_EQ(net.predict_scalar(v({3.0})), 6.0);
}

TEST(Backward, ZeroOutputGradientAndNoDecayGivesZero) {
  RngStream rng(2);
  const Network net = student_architecture(rng, InputMode::dense_then_relu, 0.0);
  const Gradients g = net.backward(net.forward(v({4.0})), v({0.0}));
  for (const auto& l : g.layers) {
    for (double x : l.weights) ASSERT_EQ(x, 0.0);
    for (double x : l.biases) ASSERT_EQ(x, 0.0);
  }
}

TEST(Backward, IdentityScalarWeightGradientIsInput) {
  Network net = Network::zeros({{1, 1, Activation::identity}});
  net.mutable_layer(0).weights = {0.7};
  const Gradients g = net.backward(net.forward(v({2.5})), v({1.0}));
  EXPECT_DOUBLE_EQ(g.layers[0].weights[0], 2.5);
  EXPECT_DOUBLE_EQ(g.layers[0].biases[0], 1.0);
  EXPECT_DOUBLE_EQ(g.input[0], 0.7);
}

TEST(Backward, WeightDecayAddsL2TimesWeight) {
  Network net = Network::zeros({{1, 1, Activation::identity}}, 0.1);
  net.mutable_layer(0).weights = {0.7};
  net.mutable_layer(0).biases = {5.0};
  const Gradients g = net.backward(net.forward(v({2.5})), v({0.0}));
  EXPECT_DOUBLE_EQ(g.layers[0].weights[0], 0.07);
  EXPECT_DOUBLE_EQ(g.layers[0].biases[0], 0.0);
}

TEST(Backward, FiniteDifferenceAllConfigurations) {
  RngStream init(3), probes(4);
  const Network nets[] = {student_architecture(init, InputMode::dense_then_relu),
                          student_architecture(init, InputMode::relu_on_input),
                          critic_architecture(init)};
  for (const auto& net : nets) {
    const GradCheckResult r = check_gradients(net, probes, 100, net.input_width() == 1 ? 10.8 : 90.0);
    EXPECT_TRUE(r.passed()) << "max relative error " << r.max_relative_error;
    EXPECT_LE(r.max_relative_error, 1e-4);
    EXPECT_EQ(r.probes, 100);
  }
}

TEST(Backward, FiniteDifferenceSmallMultiOutput) {
  RngStream init(5), probes(6);
  const Network net({{3, 5, Activation::relu}, {5, 4, Activation::relu}, {4, 2, Activation::identity}}, 0.3, init);
  EXPECT_TRUE(check_gradients(net, probes, 200, 2.0).passed());
}

TEST(Backward, InputGradientMatchesBackward) {
  RngStream rng(7);
  const Network net = critic_architecture(rng);
  const ForwardCache cache = net.forward(v({10.0, -20.0}));
  const auto a = net.input_gradient(cache, v({1.0}));
  const auto b = net.backward(cache, v({1.0})).input;
  ASSERT_EQ(a.size(), 2u);
  EXPECT_DOUBLE_EQ(a[0], b[0]);
  EXPECT_DOUBLE_EQ(a[1], b[1]);
}

TEST(Cache, StaleCacheRejected) {
  RngStream rng(8);
  Network net = student_architecture(rng);
  const ForwardCache cache = net.forward(v({1.0}));
  net.mutable_layer(0).biases[0] += 1.0;
  EXPECT_THROW(net.backward(cache, v({1.0})), std::logic_error);
  const Network other = net;
  const ForwardCache fresh = net.forward(v({1.0}));
  EXPECT_THROW(other.backward(fresh, v({1.0})), std::logic_error);
}

TEST(Network, InputWidthMismatch) {
  RngStream rng(9);
  const Network critic = critic_architecture(rng);
  EXPECT_THROW(critic.predict(v({1.0})), std::invalid_argument);
  EXPECT_TRUE(std::isfinite(critic.predict_scalar(v({0.0, 0.0}))));
  const Network student = student_architecture(rng);
  EXPECT_TRUE(std::isfinite(student.predict_scalar(v({0.0}))));
}

TEST(Network, SameSeedSameParameters) {
  RngStream a(10), b(10);
  EXPECT_EQ(student_architecture(a).flat_parameters(), student_architecture(b).flat_parameters());
}

TEST(Network, HeUniformBoundsAndZeroBiases) {
  RngStream rng(11);
  const Network net = student_architecture(rng);
  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    const double bound = std::sqrt(6.0 / static_cast<double>(net.layer(li).spec.input_width));
    for (double w : net.layer(li).weights) ASSERT_LE(std::abs(w), bound);
    for (double b : net.layer(li).biases) ASSERT_EQ(b, 0.0);
  }
}

// Scalar oracle for the first bias-corrected step: m_hat = g, v_hat = g^2.
TEST(Adam, FirstStepScalarOracle) {
  for (double g0 : {0.3, -2.0, 1e-3}) {
    Network net = Network::zeros({{1, 1, Activation::identity}});
    net.mutable_layer(0).weights = {1.0};
    Gradients g = net.make_gradients();
    g.layers[0].weights[0] = g0;
    const AdamConfig cfg;
    net.adam_step(g, cfg);
    const double m = (1 - 0.9) * g0, vv = (1 - 0.999) * g0 * g0;
    const double m_hat = m / (1 - 0.9), v_hat = vv / (1 - 0.999);
    EXPECT_NEAR(net.layer(0).weights[0], 1.0 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
    EXPECT_EQ(net.layer(0).biases[0], 0.0);
  }
}

TEST(Adam, ConstantGradientMovesAtLearningRate) {
  Network net = Network::zeros({{1, 1, Activation::identity}});
  Gradients g = net.make_gradients();
  g.layers[0].weights[0] = 0.37;
  g.layers[0].biases[0] = -5.0;
  for (int i = 0; i < 1000; ++i) net.adam_step(g, AdamConfig{});
  EXPECT_NEAR(net.layer(0).weights[0], -1.0, 1e-6);
  EXPECT_NEAR(net.layer(0).biases[0], 1.0, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  RngStream rng(12);
  Network net = student_architecture(rng);
  const auto before = net.flat_parameters();
  const Gradients g = net.make_gradients();
  for (int i = 0; i < 10; ++i) net.adam_step(g, AdamConfig{});
  EXPECT_EQ(net.flat_parameters(), before);
}

TEST(Adam, ShapeMismatchRejected) {
  RngStream rng(13);
  Network a = student_architecture(rng);
  const Network b = critic_architecture(rng);
  EXPECT_THROW(a.adam_step(b.make_gradients(), AdamConfig{}), std::invalid_argument);
  AdamConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Adam, WeightDecayShrinksWeightsOnly) {
  RngStream rng(14);
  Network net({{1, 8, Activation::relu}, {8, 1, Activation::identity}}, 0.1, rng);
  net.mutable_layer(0).biases.assign(8, 0.5);
  double before = 0.0;
  for (double w : net.layer(0).weights) before += std::abs(w);
  for (int i = 0; i < 2000; ++i) {
    Gradients g = net.make_gradients();
    net.add_weight_decay(g);
    net.adam_step(g, AdamConfig{});
  }
  double after = 0.0;
  for (double w : net.layer(0).weights) after += std::abs(w);
  EXPECT_LT(after, 0.5 * before);
  for (double b : net.layer(0).biases) EXPECT_EQ(b, 0.5);
}

TEST(Persistence, SaveLoadRoundTrip) {
  RngStream rng(15);
  Network net = student_architecture(rng, InputMode::relu_on_input, 0.05);
  Gradients g = net.backward(net.forward(v({3.0})), v({1.0}));
  net.adam_step(g, AdamConfig{});
  std::stringstream ss;
  net.save(ss);
  Network back = Network::load(ss);
  EXPECT_EQ(back.flat_parameters(), net.flat_parameters());
  EXPECT_EQ(back.l2(), 0.05);
  EXPECT_EQ(back.input_mode(), InputMode::relu_on_input);
  EXPECT_EQ(back.adam_steps(), 1u);
  // Continuing training from the loaded copy matches the original.
  net.adam_step(g, AdamConfig{});
  back.adam_step(g, AdamConfig{});
  EXPECT_EQ(back.flat_parameters(), net.flat_parameters());
}

TEST(Persistence, RejectsForeignFormat) {
  std::stringstream ss("{\"format\":\"other\",\"version\":1}\n");
  EXPECT_THROW(Network::load(ss), std::runtime_error);
}
