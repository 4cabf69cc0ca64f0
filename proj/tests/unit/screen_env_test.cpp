#include <gtest/gtest.h>

#include <cmath>

#include "ddx/error.hpp"
#include "ddx/rl_train.hpp"
#include "ddx/screen_env.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

// small_ontology: 0 fever, 1 cough, 2 high_fever, 3 chills, 4 night_sweats,
// 5 dry_cough, 6 wet_cough, 7 blood_in_sputum.
PatientRecord record(BitVector symptoms, BitVector denials = {}) {
  PatientRecord r;
  r.id = "t";
  r.oracle_symptoms = std::move(symptoms);
  r.explicit_denials = denials.empty() ? BitVector(r.oracle_symptoms.size(), 0) : std::move(denials);
  r.history = {0.5, -1.0};
  return r;
}

std::size_t unknown_count(const ScreeningState& s) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < s.symptom_count(); ++j) n += s.state(SymptomId{j}) == SymptomState::unknown;
  return n;
}

TEST(ScreenEnv, ResetDisclosesTheOnlyPositive) {
  auto o = testing::small_ontology();
  auto r = record({0, 1, 0, 0, 0, 1, 0, 0});
  Rng rng(1);
  auto s = reset(r, o, rng);
  EXPECT_EQ(s.state(SymptomId{1}), SymptomState::confirmed);
  EXPECT_EQ(s.triplets[3], 0);
  EXPECT_EQ(s.triplets[4], 1);
  EXPECT_EQ(s.triplets[5], 0);
  EXPECT_TRUE(s.asked[1]);
  EXPECT_EQ(s.turn, 0u);
  EXPECT_EQ(unknown_count(s), o.size() - 1);
  for (std::size_t j = 0; j < o.size(); ++j) {
    if (j == 1) continue;
    EXPECT_EQ(s.triplets[3 * j], 0);
    EXPECT_EQ(s.triplets[3 * j + 1], 0);
    EXPECT_EQ(s.triplets[3 * j + 2], 1);
  }
}

TEST(ScreenEnv, ResetRequiresPositiveFirstLayer) {
  auto o = testing::small_ontology();
  Rng rng(1);
  EXPECT_THROW(reset(record(BitVector(8, 0)), o, rng), ContractViolation);
}

TEST(ScreenEnv, DisclosureIsUniformAmongPositives) {
  auto o = testing::small_ontology();
  auto r = record({1, 1, 0, 0, 0, 0, 0, 0});
  Rng fixed_a(5), fixed_b(5);
  EXPECT_EQ(reset(r, o, fixed_a).disclosed, reset(r, o, fixed_b).disclosed);

  const int n = 10000;
  int first = 0;
  for (int seed = 0; seed < n; ++seed) {
    Rng rng(derive_seed(99, static_cast<std::uint64_t>(seed)));
    first += reset(r, o, rng).disclosed->value == 0;
  }
  // Chi-square with one degree of freedom against 50/50, 0.999 quantile.
  const double e = n / 2.0;
  const double chi2 = (first - e) * (first - e) / e + ((n - first) - e) * ((n - first) - e) / e;
  EXPECT_LT(chi2, 10.83);
}

TEST(ScreenEnv, MaskAfterDisclosure) {
  auto o = testing::small_ontology();
  auto s = disclosed_state({}, o.size(), SymptomId{0});
  auto mask = valid_action_mask(s, o);
  EXPECT_EQ(popcount(mask), 4u);
  EXPECT_EQ(mask, (BitVector{0, 1, 1, 1, 1, 0, 0, 0}));
}

TEST(ScreenEnv, DeniedParentMasksChildren) {
  auto o = testing::small_ontology();
  auto s = disclosed_state({}, o.size(), SymptomId{0});
  apply_answer(s, SymptomId{1}, SymptomState::denied);
  auto mask = valid_action_mask(s, o);
  EXPECT_EQ(mask[5], 0);
  EXPECT_EQ(mask[6], 0);
  EXPECT_EQ(mask[7], 0);
}

TEST(ScreenEnv, AllAskedMaskIsEmpty) {
  auto o = testing::small_ontology();
  auto s = disclosed_state({}, o.size(), SymptomId{0});
  for (std::size_t j = 1; j < o.size(); ++j) apply_answer(s, SymptomId{j}, SymptomState::denied);
  EXPECT_EQ(popcount(valid_action_mask(s, o)), 0u);
  EXPECT_FALSE(any_valid_action(s, o));
}

TEST(ScreenEnv, StepRewardsPresence) {
  auto o = testing::small_ontology();
  auto r = record({1, 1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 0, 0, 0, 0});
  auto s = disclosed_state(r.history, o.size(), SymptomId{0});
  EnvConfig p;
  p.budget = 5;
  auto res = step(s, SymptomId{1}, r, o, p);
  EXPECT_EQ(res.reward, 1.0);
  EXPECT_EQ(s.state(SymptomId{1}), SymptomState::confirmed);
  EXPECT_EQ(s.turn, 1u);

  EnvConfig pn = p;
  pn.reward = RewardVariant::positive_negative;
  auto not_denied = step(s, SymptomId{2}, r, o, pn);
  EXPECT_EQ(not_denied.reward, 0.0);
  auto denied = step(s, SymptomId{3}, r, o, pn);
  EXPECT_DOUBLE_EQ(denied.reward, 0.2);
  EXPECT_EQ(s.triplets[9], 1);
  EXPECT_EQ(s.triplets[10], 0);
  EXPECT_EQ(s.triplets[11], 0);

  auto s2 = disclosed_state(r.history, o.size(), SymptomId{0});
  EXPECT_EQ(step(s2, SymptomId{3}, r, o, p).reward, 0.0);
}

TEST(ScreenEnv, MaskedActionIsContractViolation) {
  auto o = testing::small_ontology();
  auto r = record({1, 1, 0, 0, 0, 0, 0, 0});
  auto s = disclosed_state(r.history, o.size(), SymptomId{0});
  EnvConfig cfg;
  EXPECT_THROW(step(s, SymptomId{0}, r, o, cfg), ContractViolation);  // already disclosed
  EXPECT_THROW(step(s, SymptomId{5}, r, o, cfg), ContractViolation);  // parent unconfirmed
  EXPECT_THROW(step(s, SymptomId{8}, r, o, cfg), ContractViolation);
}

TEST(ScreenEnv, ObserveLayout) {
  auto o = parse_ontology("1\ta\t-\n");
  ScreeningState s;
  s.history = {0.5, -1.0};
  s.triplets = {0, 0, 1};
  s.asked = {0};
  EXPECT_EQ(observe(s), (std::vector<double>{0.5, -1.0, 0.0, 0.0, 1.0}));
  EXPECT_EQ(observe(s), observe(s));
}

TEST(ScreenEnv, RandomEpisodesKeepInvariants) {
  auto o = generate_synthetic_ontology(5, 3, 1);
  CohortConfig cfg;
  cfg.diseases = 4;
  cfg.size = 200;
  cfg.history_dim = 2;
  cfg.families = 0;
  auto cohort = generate_cohort(o, cfg);
  Rng rng(3);
  for (auto variant : {RewardVariant::positive, RewardVariant::positive_negative}) {
    for (std::size_t budget : {1u, 4u, 30u}) {
      EnvConfig env;
      env.budget = budget;
      env.reward = variant;
      for (const auto& r : cohort.records) {
        auto s = reset(r, o, rng);
        double ret = 0.0;
        std::size_t found = 0;
        std::set<std::size_t> asked;
        for (bool done = false; !done;) {
          auto mask = valid_action_mask(s, o);
          ASSERT_GT(popcount(mask), 0u);
          const auto a = random_policy(mask, rng);
          ASSERT_TRUE(asked.insert(a.value).second);
          if (auto p = o.parent_of(a)) {
            ASSERT_EQ(s.state(*p), SymptomState::confirmed);
          }
          auto res = step(s, a, r, o, env);
          ret += res.reward;
          found += r.oracle_symptoms[a.value];
          done = res.done;
          for (std::size_t j = 0; j < o.size(); ++j) {
            const int ones = s.triplets[3 * j] + s.triplets[3 * j + 1] + s.triplets[3 * j + 2];
            ASSERT_EQ(ones, 1);
            if (s.asked[j]) {
              ASSERT_NE(s.state(SymptomId{j}), SymptomState::unknown);
            }
          }
          if (done) ASSERT_TRUE(s.turn == budget || !any_valid_action(s, o));
          else ASSERT_LT(s.turn, budget);
        }
        if (variant == RewardVariant::positive) {
          EXPECT_EQ(ret, double(found));
        }
      }
    }
  }
}

TEST(ScreenEnv, EvidenceDecodesTriplets) {
  auto o = testing::small_ontology();
  auto s = disclosed_state({1.0, 2.0}, o.size(), SymptomId{1});
  apply_answer(s, SymptomId{0}, SymptomState::denied);
  auto e = evidence_from(s);
  EXPECT_EQ(e.symptoms[0], SymptomState::denied);
  EXPECT_EQ(e.symptoms[1], SymptomState::confirmed);
  EXPECT_EQ(e.symptoms[2], SymptomState::unknown);
  ASSERT_TRUE(e.history.has_value());
  EXPECT_FALSE(evidence_from(s, false).history.has_value());
}

TEST(ScreenEnv, RewardVariantNames) {
  EXPECT_EQ(parse_reward_variant("P"), RewardVariant::positive);
  EXPECT_EQ(parse_reward_variant("PN"), RewardVariant::positive_negative);
  EXPECT_THROW(parse_reward_variant("Q"), ConfigError);
}

}  // namespace
}  // namespace ddx
