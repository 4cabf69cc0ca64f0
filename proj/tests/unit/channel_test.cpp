#include <gtest/gtest.h>

#include <cmath>

#include "ddx/channel.hpp"
#include "ddx/error.hpp"

namespace ddx {
namespace {

TEST(ExactChannel, IsIdentity) {
  ExactChannel c;
  EXPECT_EQ(c.render_question("Any fever?"), "Any fever?");
  EXPECT_TRUE(c.deliver_answer("q", true));
  EXPECT_FALSE(c.deliver_answer("q", false));
  for (auto s : {SymptomState::denied, SymptomState::confirmed, SymptomState::unknown}) {
    EXPECT_EQ(c.deliver_symptom("q", s), s);
  }
}

TEST(NoisyChannel, ZeroNoiseIsExact) {
  NoisyChannel c({0.0, 0.0, 4});
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(c.deliver_answer("q", true));
    EXPECT_FALSE(c.deliver_answer("q", false));
  }
}

TEST(NoisyChannel, SaturatedRatesFlipEverything) {
  NoisyChannel c({1.0, 1.0, 4});
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(c.deliver_answer("q", true));
    EXPECT_TRUE(c.deliver_answer("q", false));
  }
  NoisyChannel yes_only({1.0, 0.0, 4});
  EXPECT_EQ(yes_only.deliver_symptom("q", SymptomState::denied), SymptomState::confirmed);
  EXPECT_EQ(yes_only.deliver_symptom("q", SymptomState::unknown), SymptomState::confirmed);
  NoisyChannel no_only({0.0, 1.0, 4});
  EXPECT_EQ(no_only.deliver_symptom("q", SymptomState::confirmed), SymptomState::denied);
  EXPECT_EQ(no_only.deliver_symptom("q", SymptomState::unknown), SymptomState::unknown);
}

TEST(NoisyChannel, EmpiricalRatesWithinThreeSigma) {
  const double a = 0.15, b = 0.05;
  NoisyChannel c({a, b, 11});
  const int n = 20000;
  int neg_flips = 0, pos_flips = 0;
  for (int i = 0; i < n; ++i) {
    neg_flips += c.deliver_answer("q", false);
    pos_flips += !c.deliver_answer("q", true);
  }
  EXPECT_LT(std::abs(double(neg_flips) / n - a), 3 * std::sqrt(a * (1 - a) / n));
  EXPECT_LT(std::abs(double(pos_flips) / n - b), 3 * std::sqrt(b * (1 - b) / n));
}

TEST(NoisyChannel, OneDrawPerDelivery) {
  NoisyChannel mixed({0.3, 0.3, 8}), all_true({0.3, 0.3, 8});
  std::vector<bool> truths;
  Rng pattern(2);
  for (int i = 0; i < 500; ++i) truths.push_back(pattern.bernoulli(0.5));
  for (int i = 0; i < 500; ++i) {
    const bool got = mixed.deliver_answer("q", truths[i]);
    const bool ref = all_true.deliver_answer("q", true);
    // Same uniform decides both: a flip of "yes" happens iff u < 0.3, as does a flip of "no".
    EXPECT_EQ(got != truths[i], !ref);
  }
}

TEST(NoisyChannel, ValidatesRates) {
  EXPECT_THROW(NoisyChannel({-0.1, 0.0, 1}), ConfigError);
  EXPECT_THROW(NoisyChannel({0.0, 1.5, 1}), ConfigError);
  EXPECT_THROW(noisy_channel_factory({std::nan(""), 0.0, 1}), ConfigError);
}

TEST(ChannelFactory, StreamsAreReproducibleAndDistinct) {
  auto f = noisy_channel_factory({0.5, 0.5, 3});
  auto a = f(1), b = f(1), c = f(2);
  int same = 0, differ = 0;
  for (int i = 0; i < 200; ++i) {
    const bool x = a->deliver_answer("q", true);
    same += x == b->deliver_answer("q", true);
    differ += x != c->deliver_answer("q", true);
  }
  EXPECT_EQ(same, 200);
  EXPECT_GT(differ, 0);
  EXPECT_TRUE(exact_channel_factory()(7)->deliver_answer("q", true));
}

}  // namespace
}  // namespace ddx
