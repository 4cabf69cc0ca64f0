#include <gtest/gtest.h>

#include <functional>

#include "ddx/config.hpp"
#include "ddx/error.hpp"
#include "ddx/io.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

std::string config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, EmptyDocumentGivesDefaults) {
  for (const char* text : {"", "  \n\t", "{}"}) {
    auto c = parse_config(text);
    for (const auto& def : ExperimentConfig::schema()) {
      EXPECT_EQ(c.value(def.key), def.default_value) << def.key;
      EXPECT_EQ(c.source(def.key), Source::default_value);
    }
  }
  auto c = parse_config("");
  EXPECT_EQ(c.get_uint("cohort.size"), CohortConfig{}.size);
  EXPECT_EQ(ppo_config(c).total_steps, PpoConfig{}.total_steps);
  EXPECT_EQ(network_shape(c).trunk_hidden, ActorCriticShape{}.trunk_hidden);
  auto split = split_fractions(c);
  EXPECT_EQ(split.train, 0.7);
  EXPECT_EQ(split.validation, 0.1);
  EXPECT_EQ(split.test, 0.2);
  EXPECT_EQ(env_config(c).pn_denial_reward, 0.2);
}

TEST(Config, NestedAndDottedValues) {
  auto c = parse_config(R"({"cohort": {"size": 500, "history_noise": 2.5}, "env": {"reward": "PN"}})");
  EXPECT_EQ(c.get_uint("cohort.size"), 500u);
  EXPECT_EQ(c.get_double("cohort.history_noise"), 2.5);
  EXPECT_EQ(env_config(c).reward, RewardVariant::positive_negative);
  EXPECT_EQ(c.source("cohort.size"), Source::file);
  EXPECT_EQ(c.source("cohort.diseases"), Source::default_value);
}

TEST(Config, MisspelledKeyNamesNearestKey) {
  auto msg = config_error([] { parse_config(R"({"cohort": {"sise": 5}})"); });
  EXPECT_NE(msg.find("cohort.sise"), std::string::npos);
  EXPECT_NE(msg.find("cohort.size"), std::string::npos);
  ExperimentConfig c;
  msg = config_error([&] { c.set("ppo.gama", "0.9"); });
  EXPECT_NE(msg.find("ppo.gamma"), std::string::npos);
  EXPECT_EQ(nearest_key("env.budgte"), "env.budget");
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
}

TEST(Config, FlagOverridesFileOverridesDefault) {
  auto c = parse_config(R"({"env": {"budget": 20}})");
  EXPECT_EQ(c.get_uint("env.budget"), 20u);
  c.set("env.budget", "40");
  EXPECT_EQ(c.get_uint("env.budget"), 40u);
  EXPECT_EQ(c.source("env.budget"), Source::flag);
  const auto resolved = c.resolved();
  EXPECT_EQ(resolved["env.budget"]["value"], 40);
  EXPECT_EQ(resolved["env.budget"]["source"], "flag");
  EXPECT_EQ(resolved["ppo.gamma"]["source"], "default");
  EXPECT_EQ(resolved.size(), ExperimentConfig::schema().size());
}

TEST(Config, TypeMismatchesAndChoices) {
  EXPECT_NE(config_error([] { parse_config(R"({"cohort": {"size": "big"}})"); }).find("cohort.size"),
            std::string::npos);
  EXPECT_FALSE(config_error([] { parse_config(R"({"cohort": {"size": -3}})"); }).empty());
  EXPECT_FALSE(config_error([] { parse_config(R"({"env": {"reward": "X"}})"); }).empty());
  EXPECT_FALSE(config_error([] { parse_config("[1, 2]"); }).empty());
  EXPECT_FALSE(config_error([] { parse_config("{broken"); }).empty());
  ExperimentConfig c;
  EXPECT_THROW(c.set("cohort.size", "12x"), ConfigError);
  EXPECT_THROW(c.set("ppo.gamma", "abc"), ConfigError);
  c.set("network.trunk_hidden", "32, 16");
  EXPECT_EQ(c.get_sizes("network.trunk_hidden"), (std::vector<std::size_t>{32, 16}));
}

TEST(Config, ProcedureEntries) {
  auto c = parse_config(R"({"procedures": [{"disease": "hf", "path": "p.dproc"}]})");
  auto refs = c.procedures();
  ASSERT_EQ(refs.size(), 1u);
  EXPECT_EQ(refs[0].disease, "hf");
  EXPECT_EQ(refs[0].path, "p.dproc");
  auto msg = config_error([] { parse_config(R"({"procedures": [{"disease": "hf"}]})"); });
  EXPECT_NE(msg.find("missing required key 'procedures[0].path'"), std::string::npos);
  msg = config_error([] { parse_config(R"({"procedures": [{"disease": "hf", "paht": "x"}]})"); });
  EXPECT_NE(msg.find("procedures[0].path"), std::string::npos);
  ExperimentConfig flags;
  flags.set("procedures", "a=x.dproc;b=y.dproc");
  EXPECT_EQ(flags.procedures().size(), 2u);
  EXPECT_THROW(flags.set("procedures", "nopath"), ConfigError);
}

TEST(Config, LoadFile) {
  const auto dir = testing::scratch_dir("config");
  write_file(dir / "c.json", R"({"cohort": {"diseases": 7}})");
  EXPECT_EQ(cohort_config(load_config(dir / "c.json")).diseases, 7u);
  write_file(dir / "empty.json", "");
  EXPECT_EQ(load_config(dir / "empty.json").get_uint("cohort.diseases"), CohortConfig{}.diseases);
  EXPECT_THROW(load_config(dir / "missing.json"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ddx
