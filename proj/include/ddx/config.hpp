#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ddx/channel.hpp"
#include "ddx/cohort.hpp"
#include "ddx/neural.hpp"
#include "ddx/procedure.hpp"
#include "ddx/rl_train.hpp"
#include "ddx/screen_env.hpp"
#include "ddx/screener.hpp"

namespace ddx {

using Json = nlohmann::ordered_json;

enum class ValueType { integer, number, boolean, string, integer_list, procedure_list };
enum class Source { default_value, file, flag };

const char* to_string(Source s);

struct KeyDef {
  std::string key;  // dotted path, e.g. "cohort.size"
  ValueType type = ValueType::integer;
  Json default_value;
  std::string help;
  std::vector<std::string> choices;  // string keys only; empty = free text
};

struct ProcedureRef {
  std::string disease;
  std::string path;
};

// Every tunable of an experiment, each with the place its value came from.
class ExperimentConfig {
 public:
  static const std::vector<KeyDef>& schema();
  static const KeyDef* find_key(std::string_view key);

  ExperimentConfig();

  // Nested JSON object; unknown keys, type mismatches and incomplete
  // procedure entries throw ConfigError.
  void merge(const Json& document, Source source);
  // One key from command-line text, parsed according to the key's type.
  void set(std::string_view key, std::string_view text, Source source = Source::flag);

  const Json& value(std::string_view key) const;
  Source source(std::string_view key) const;

  std::uint64_t get_uint(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::string get_string(std::string_view key) const;
  std::vector<std::size_t> get_sizes(std::string_view key) const;
  std::vector<ProcedureRef> procedures() const;

  // {"key": {"value": ..., "source": ...}, ...} in schema order.
  Json resolved() const;

 private:
  void assign(const KeyDef& def, Json value, Source source);

  std::map<std::string, Json, std::less<>> values_;
  std::map<std::string, Source, std::less<>> sources_;
};

// Empty or whitespace-only files give all defaults.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view text);

// Closest schema key by edit distance.
std::string nearest_key(std::string_view key);
std::size_t edit_distance(std::string_view a, std::string_view b);

CohortConfig cohort_config(const ExperimentConfig& c);
SplitFractions split_fractions(const ExperimentConfig& c);
EnvConfig env_config(const ExperimentConfig& c);
PpoConfig ppo_config(const ExperimentConfig& c);
ActorCriticShape network_shape(const ExperimentConfig& c);
ScreenerConfig screener_config(const ExperimentConfig& c);
NoisyChannelConfig noisy_channel_config(const ExperimentConfig& c);
LabeledCohortConfig labeled_cohort_config(const ExperimentConfig& c);

}  // namespace ddx
