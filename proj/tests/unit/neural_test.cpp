#include <gtest/gtest.h>

#include <cmath>

#include "ddx/error.hpp"
#include "ddx/neural.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Identity(3, 3);
  l.bias = Eigen::VectorXd::Zero(3);
  Mlp net({l});
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, LinearInputGradientIsWtWx) {
  Rng rng(2);
  DenseLayer l;
  l.weight = random_matrix(rng, 4, 3);
  l.bias = Eigen::VectorXd::Zero(4);
  Mlp net({l});
  Eigen::MatrixXd x = random_matrix(rng, 3, 1);
  ForwardCache cache;
  Eigen::MatrixXd y = net.forward(x, cache);
  auto grads = net.zero_gradients();
  // L = 0.5 |y|^2, so dL/dy = y.
  Eigen::MatrixXd dx = net.backward(cache, y, grads);
  Eigen::MatrixXd expect = l.weight.transpose() * l.weight * x;
  EXPECT_LT((dx - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp, FiniteDifferenceThreeLayers) {
  Rng rng(3);
  for (auto act : {Activation::tanh, Activation::relu}) {
    Mlp net({5, 7, 6, 3}, {act, act, Activation::identity}, rng);
    Eigen::MatrixXd x = random_matrix(rng, 5, 4);
    if (!testing::clear_of_kinks(net, x, 1e-3)) continue;
    Eigen::MatrixXd probe = random_matrix(rng, 3, 4);
    auto check = testing::check_mlp_gradients(net, x, probe);
    EXPECT_LT(check.max_relative_error, 1e-4);
    EXPECT_GT(check.entries, 100u);
  }
}

TEST(Mlp, ShapeAndFiniteChecks) {
  Rng rng(1);
  Mlp net({3, 2}, {Activation::identity}, rng);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(4, 1)), ShapeError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 1);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(net.forward(bad), NumericError);
  EXPECT_THROW(Mlp({3, 2}, {}, rng), ShapeError);
}

TEST(Mlp, ForwardIsPure) {
  Rng rng(4);
  Mlp net({4, 8, 2}, {Activation::relu, Activation::identity}, rng);
  Eigen::MatrixXd x = random_matrix(rng, 4, 5);
  EXPECT_EQ(net.forward(x), net.forward(x));
}

TEST(MaskedSoftmax, Examples) {
  std::vector<double> zeros{0, 0, 0};
  auto p = masked_softmax(zeros, {1, 0, 1});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
  EXPECT_DOUBLE_EQ(p[2], 0.5);
  std::vector<double> logits{3.0, -1.0, 7.0};
  auto single = masked_softmax(logits, {0, 1, 0});
  EXPECT_EQ(single, (std::vector<double>{0.0, 1.0, 0.0}));
  EXPECT_THROW(masked_softmax(logits, {0, 0, 0}), ContractViolation);
}

TEST(MaskedSoftmax, ShiftInvariantAndStable) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(10);
    BitVector mask(10, 0);
    for (auto& l : logits) l = rng.normal() * 5.0;
    for (auto& m : mask) m = rng.bernoulli(0.5);
    mask[rng.index(10)] = 1;
    auto p = masked_softmax(logits, mask);
    std::vector<double> shifted = logits;
    for (auto& l : shifted) l += 1000.0;
    auto q = masked_softmax(shifted, mask);
    double total = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
      if (!mask[j]) {
        EXPECT_EQ(p[j], 0.0);
      }
      EXPECT_NEAR(p[j], q[j], 1e-12);
      total += p[j];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(CrossEntropy, Examples) {
  std::vector<double> onehot{0, 1, 0};
  EXPECT_EQ(cross_entropy(onehot, 1), 0.0);
  std::vector<double> uniform(4, 0.25);
  EXPECT_NEAR(cross_entropy(uniform, 2), std::log(4.0), 1e-15);
  EXPECT_TRUE(std::isfinite(cross_entropy(onehot, 0)));
  EXPECT_NEAR(cross_entropy(onehot, 0), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> probs(5);
    double total = 0;
    for (auto& p : probs) total += (p = rng.uniform(0.05, 1.0));
    for (auto& p : probs) p /= total;
    const std::size_t label = rng.index(5);
    auto grad = cross_entropy_gradient(probs, label);
    auto check = testing::check_gradient(probs, grad, [&] { return cross_entropy(probs, label); });
    EXPECT_LT(check.max_relative_error, 1e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  std::vector<std::span<double>> ps{p}, gs{g};
  Adam adam;
  adam.step(ps, gs);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
  std::vector<double> p{1.0, -2.0, 0.5}, g{0.3, -7.0, 1e-3};
  std::vector<std::span<double>> ps{p}, gs{g};
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  Adam adam(cfg);
  adam.step(ps, gs);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], -2.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 0.5 - 0.01, 1e-4);
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
  auto run = [] {
    std::vector<double> p{1.0, 2.0};
    Adam adam;
    for (int i = 0; i < 10; ++i) {
      std::vector<double> g{p[0] * 0.5, -p[1]};
      std::vector<std::span<double>> ps{p}, gs{g};
      adam.step(ps, gs);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
  std::vector<double> p{1.0}, g{std::numeric_limits<double>::infinity()};
  std::vector<std::span<double>> ps{p}, gs{g};
  Adam adam;
  EXPECT_THROW(adam.step(ps, gs), NumericError);
}

TEST(Weights, RoundTripIsBitwise) {
  Rng rng(11);
  Mlp net({6, 9, 4}, {Activation::tanh, Activation::identity}, rng);
  auto back = parse_mlp_weights(serialize_weights(net));
  Eigen::MatrixXd probe = random_matrix(rng, 6, 7);
  EXPECT_EQ(net.forward(probe), back.forward(probe));

  auto ac = ActorCritic::create(6, 5, {{8, 8}, 4}, rng);
  auto ac_back = parse_actor_critic_weights(serialize_weights(ac));
  auto a = forward(ac, probe);
  auto b = forward(ac_back, probe);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(serialize_weights(ac_back), serialize_weights(ac));
}

TEST(Weights, FilesRoundTrip) {
  Rng rng(12);
  Mlp net({3, 2}, {Activation::identity}, rng);
  const auto dir = testing::scratch_dir("weights");
  save_weights(net, dir / "w.json");
  EXPECT_EQ(serialize_weights(load_mlp(dir / "w.json")), serialize_weights(net));
  std::filesystem::remove_all(dir);
}

TEST(Weights, CorruptAndVersionErrors) {
  Rng rng(13);
  Mlp net({3, 2}, {Activation::identity}, rng);
  const auto text = serialize_weights(net);
  EXPECT_THROW(parse_mlp_weights(text.substr(0, text.size() / 2)), FormatError);
  auto v2 = text;
  v2.replace(v2.find("\"format_version\":1"), 18, "\"format_version\":2");
  try {
    parse_mlp_weights(v2);
    FAIL() << "version 2 accepted";
  } catch (const VersionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('1'), std::string::npos);
  }
  EXPECT_THROW(parse_actor_critic_weights(text), FormatError);
}

TEST(ActorCritic, FiniteDifferenceThroughBothHeads) {
  Rng rng(14);
  auto net = ActorCritic::create(4, 3, {{5}, 4}, rng);
  for (auto* m : {&net.trunk, &net.policy_head, &net.value_head}) {
    for (auto& l : m->layers()) {
      if (l.activation == Activation::relu) l.activation = Activation::tanh;
    }
  }
  Eigen::MatrixXd obs = random_matrix(rng, 4, 3);
  Eigen::MatrixXd probe_logits = random_matrix(rng, 3, 3);
  Eigen::RowVectorXd probe_values = random_matrix(rng, 1, 3);
  auto loss = [&] {
    auto f = forward(net, obs);
    return (f.logits.array() * probe_logits.array()).sum() +
           (f.values.array() * probe_values.array()).sum();
  };
  auto fwd = forward(net, obs);
  auto grads = backward(net, fwd, probe_logits, probe_values);
  auto params = net.parameters();
  auto blocks = grads.blocks();
  ASSERT_EQ(params.size(), blocks.size());
  for (std::size_t b = 0; b < params.size(); ++b) {
    std::vector<double> analytic(blocks[b].begin(), blocks[b].end());
    EXPECT_LT(testing::check_gradient(params[b], analytic, loss).max_relative_error, 1e-4);
  }
}

}  // namespace
}  // namespace ddx
