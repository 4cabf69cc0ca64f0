#include "ddx/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {

const char* to_string(Source s) {
  switch (s) {
    case Source::default_value: return "default";
    case Source::file: return "file";
    case Source::flag: return "flag";
  }
  return "default";
}

namespace {

KeyDef key(std::string name, ValueType type, Json value, std::string help,
           std::vector<std::string> choices = {}) {
  return KeyDef{std::move(name), type, std::move(value), std::move(help), std::move(choices)};
}

std::vector<KeyDef> build_schema() {
  using V = ValueType;
  const CohortConfig cohort;
  const PpoConfig ppo;
  const ActorCriticShape shape;
  const ScreenerConfig screener;
  const EnvConfig env;
  const LabeledCohortConfig labeled;
  return {
      key("seed", V::integer, 1, "master seed for every random stream"),
      key("parallelism", V::integer, 1, "worker threads for batch evaluation"),
      key("ontology.first_layer", V::integer, 10, "first-layer symptom categories"),
      key("ontology.children_per_first", V::integer, 5, "second-layer symptoms per category"),
      key("cohort.diseases", V::integer, cohort.diseases, "number of diseases"),
      key("cohort.size", V::integer, cohort.size, "number of patient records"),
      key("cohort.history_dim", V::integer, cohort.history_dim, "history feature length"),
      key("cohort.families", V::integer, cohort.families,
          "groups of diseases sharing characteristic categories (0 = none)"),
      key("cohort.characteristic_categories", V::integer, cohort.characteristic_categories,
          "likely first-layer categories per disease"),
      key("cohort.signature_children", V::integer, cohort.signature_children,
          "likely children inside each characteristic category"),
      key("cohort.history_scale", V::number, cohort.history_scale,
          "spread of per-disease history means"),
      key("cohort.history_noise", V::number, cohort.history_noise,
          "per-record history noise standard deviation"),
      key("cohort.denial_prob", V::number, cohort.denial_prob,
          "chance an absent symptom is explicitly denied"),
      key("cohort.findings", V::integer, cohort.findings, "numeric findings per record"),
      key("cohort.finding_presence", V::number, cohort.finding_presence,
          "chance a finding is recorded"),
      key("split.train", V::number, 0.7, "training fraction"),
      key("split.validation", V::number, 0.1, "validation fraction"),
      key("split.test", V::number, 0.2, "test fraction"),
      key("env.budget", V::integer, env.budget, "screening questions after the disclosure"),
      key("env.reward", V::string, "P", "reward variant", {"P", "PN"}),
      key("env.pn_denial_reward", V::number, env.pn_denial_reward,
          "reward for an explicit denial under PN"),
      key("ppo.gamma", V::number, ppo.gamma, "discount"),
      key("ppo.gae_lambda", V::number, ppo.gae_lambda, "GAE lambda"),
      key("ppo.clip_eps", V::number, ppo.clip_eps, "ratio clip range"),
      key("ppo.epochs", V::integer, ppo.epochs_per_update, "optimisation epochs per update"),
      key("ppo.minibatch", V::integer, ppo.minibatch_size, "minibatch size"),
      key("ppo.learning_rate", V::number, ppo.learning_rate, "Adam step size"),
      key("ppo.entropy_coef", V::number, ppo.entropy_coef, "entropy bonus weight"),
      key("ppo.value_coef", V::number, ppo.value_coef, "value loss weight"),
      key("ppo.max_grad_norm", V::number, ppo.max_grad_norm, "global gradient norm clip"),
      key("ppo.n_envs", V::integer, ppo.n_envs, "environments stepped in lockstep"),
      key("ppo.rollout_steps", V::integer, ppo.rollout_steps, "transitions per update"),
      key("ppo.total_steps", V::integer, ppo.total_steps, "training transitions"),
      key("network.trunk_hidden", V::integer_list,
          Json(std::vector<std::size_t>(shape.trunk_hidden.begin(), shape.trunk_hidden.end())),
          "shared trunk widths"),
      key("network.head_hidden", V::integer, shape.head_hidden, "policy/value head width"),
      key("screener.hidden", V::integer_list,
          Json(std::vector<std::size_t>(screener.hidden.begin(), screener.hidden.end())),
          "classifier hidden widths"),
      key("screener.learning_rate", V::number, screener.learning_rate, "Adam step size"),
      key("screener.batch_size", V::integer, screener.batch_size, "minibatch size"),
      key("screener.max_epochs", V::integer, screener.max_epochs, "epoch limit"),
      key("screener.patience", V::integer, screener.patience,
          "epochs without validation improvement before stopping"),
      key("channel.kind", V::string, "exact", "semantic channel", {"exact", "noisy", "llm"}),
      key("channel.p_neg_to_pos", V::number, 0.0, "noisy channel: no heard as yes"),
      key("channel.p_pos_to_neg", V::number, 0.0, "noisy channel: yes heard as no"),
      key("channel.llm_model", V::string, "default", "model name sent to the LLM endpoint"),
      key("channel.llm_timeout_ms", V::integer, 30000, "LLM request timeout"),
      key("consult.k_candidates", V::integer, 1, "top-ranked diseases to run procedures for"),
      key("labeled.size", V::integer, labeled.size, "records in a procedure-labeled cohort"),
      key("labeled.positive_fraction", V::number, labeled.positive_fraction,
          "share of confirmed records"),
      key("labeled.symptom_prob", V::number, labeled.symptom_prob, "symptom presence"),
      key("labeled.finding_presence", V::number, labeled.finding_presence,
          "chance a finding is recorded"),
      key("procedures", V::procedure_list, Json::array(),
          "decision procedures: [{\"disease\": name, \"path\": file}]"),
      key("output.dir", V::string, "runs", "directory for outputs not named explicitly"),
  };
}

std::string type_name(ValueType t) {
  switch (t) {
    case ValueType::integer: return "a non-negative integer";
    case ValueType::number: return "a number";
    case ValueType::boolean: return "a boolean";
    case ValueType::string: return "a string";
    case ValueType::integer_list: return "a list of non-negative integers";
    case ValueType::procedure_list: return "a list of {disease, path} objects";
  }
  return "a value";
}

bool type_matches(const KeyDef& def, const Json& v) {
  switch (def.type) {
    case ValueType::integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case ValueType::number: return v.is_number() && std::isfinite(v.get<double>());
    case ValueType::boolean: return v.is_boolean();
    case ValueType::string: return v.is_string();
    case ValueType::integer_list:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) {
               return e.is_number_unsigned() || (e.is_number_integer() && e.get<std::int64_t>() >= 0);
             });
    case ValueType::procedure_list: return v.is_array();
  }
  return false;
}

void check_procedures(const Json& list) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Json& entry = list[i];
    const std::string where = "procedures[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, _] : entry.items()) {
      if (k != "disease" && k != "path") {
        throw ConfigError("unknown key '" + where + "." + k + "' (did you mean '" + where + "." +
                          (edit_distance(k, "disease") <= edit_distance(k, "path") ? "disease" : "path") +
                          "'?)");
      }
    }
    for (const char* required : {"disease", "path"}) {
      if (!entry.contains(required)) {
        throw ConfigError("missing required key '" + where + "." + required + "'");
      }
      if (!entry[required].is_string()) {
        throw ConfigError("'" + where + "." + required + "' must be a string");
      }
    }
  }
}

bool is_section(std::string_view prefix) {
  for (const auto& def : ExperimentConfig::schema()) {
    if (def.key.size() > prefix.size() && def.key.compare(0, prefix.size(), prefix) == 0 &&
        def.key[prefix.size()] == '.') {
      return true;
    }
  }
  return false;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

}  // namespace

const std::vector<KeyDef>& ExperimentConfig::schema() {
  static const std::vector<KeyDef> keys = build_schema();
  return keys;
}

const KeyDef* ExperimentConfig::find_key(std::string_view name) {
  for (const auto& def : schema()) {
    if (def.key == name) return &def;
  }
  return nullptr;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = up;
    }
  }
  return row[b.size()];
}

std::string nearest_key(std::string_view name) {
  const KeyDef* best = nullptr;
  std::size_t best_distance = 0;
  for (const auto& def : ExperimentConfig::schema()) {
    const std::size_t d = edit_distance(name, def.key);
    if (best == nullptr || d < best_distance) {
      best = &def;
      best_distance = d;
    }
  }
  return best->key;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& def : schema()) {
    values_[def.key] = def.default_value;
    sources_[def.key] = Source::default_value;
  }
}

void ExperimentConfig::assign(const KeyDef& def, Json value, Source source) {
  if (!type_matches(def, value)) {
    throw ConfigError("'" + def.key + "' must be " + type_name(def.type) + ", got " +
                      value.dump());
  }
  if (!def.choices.empty()) {
    const auto text = value.get<std::string>();
    if (std::find(def.choices.begin(), def.choices.end(), text) == def.choices.end()) {
      std::string options;
      for (const auto& c : def.choices) options += (options.empty() ? "" : ", ") + c;
      throw ConfigError("'" + def.key + "' must be one of " + options + ", got '" + text + "'");
    }
  }
  if (def.type == ValueType::procedure_list) check_procedures(value);
  values_[def.key] = std::move(value);
  sources_[def.key] = source;
}

void ExperimentConfig::merge(const Json& document, Source source) {
  if (!document.is_object()) throw ConfigError("config document must be an object");
  auto walk = [&](auto&& self, const Json& node, const std::string& prefix) -> void {
    for (const auto& [k, v] : node.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (const KeyDef* def = find_key(path)) {
        assign(*def, v, source);
      } else if (v.is_object() && is_section(path)) {
        self(self, v, path);
      } else {
        throw ConfigError("unknown key '" + path + "' (did you mean '" + nearest_key(path) + "'?)");
      }
    }
  };
  walk(walk, document, "");
}

void ExperimentConfig::set(std::string_view name, std::string_view text, Source source) {
  const KeyDef* def = find_key(name);
  if (def == nullptr) {
    throw ConfigError("unknown key '" + std::string(name) + "' (did you mean '" +
                      nearest_key(name) + "'?)");
  }
  Json value;
  switch (def->type) {
    case ValueType::integer: value = parse_uint(name, text); break;
    case ValueType::number: {
      const std::string s(text);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw ConfigError("'" + s + "' is not a number for '" + std::string(name) + "'");
      }
      value = v;
      break;
    }
    case ValueType::boolean:
      if (text == "true" || text == "1") value = true;
      else if (text == "false" || text == "0") value = false;
      else throw ConfigError("'" + std::string(name) + "' expects true or false");
      break;
    case ValueType::string: value = std::string(text); break;
    case ValueType::integer_list: {
      value = Json::array();
      for (auto part : split(text, ',')) value.push_back(parse_uint(name, trim(part)));
      break;
    }
    case ValueType::procedure_list: {
      // disease=path pairs separated by ';'
      value = Json::array();
      for (auto part : split(text, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) {
          throw ConfigError("procedures entries are written disease=path, got '" +
                            std::string(part) + "'");
        }
        value.push_back({{"disease", std::string(trim(part.substr(0, eq)))},
                         {"path", std::string(trim(part.substr(eq + 1)))}});
      }
      break;
    }
  }
  assign(*def, std::move(value), source);
}

const Json& ExperimentConfig::value(std::string_view name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractViolation("no config key '" + std::string(name) + "'");
  return it->second;
}

Source ExperimentConfig::source(std::string_view name) const {
  auto it = sources_.find(name);
  if (it == sources_.end()) throw ContractViolation("no config key '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t ExperimentConfig::get_uint(std::string_view k) const { return value(k).get<std::uint64_t>(); }
double ExperimentConfig::get_double(std::string_view k) const { return value(k).get<double>(); }
bool ExperimentConfig::get_bool(std::string_view k) const { return value(k).get<bool>(); }
std::string ExperimentConfig::get_string(std::string_view k) const { return value(k).get<std::string>(); }

std::vector<std::size_t> ExperimentConfig::get_sizes(std::string_view k) const {
  return value(k).get<std::vector<std::size_t>>();
}

std::vector<ProcedureRef> ExperimentConfig::procedures() const {
  std::vector<ProcedureRef> out;
  for (const auto& e : value("procedures")) {
    out.push_back({e.at("disease").get<std::string>(), e.at("path").get<std::string>()});
  }
  return out;
}

Json ExperimentConfig::resolved() const {
  Json out = Json::object();
  for (const auto& def : schema()) {
    out[def.key] = {{"value", value(def.key)}, {"source", to_string(source(def.key))}};
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  if (trim(text).empty()) return config;
  Json document;
  try {
    document = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  config.merge(document, Source::file);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

CohortConfig cohort_config(const ExperimentConfig& c) {
  CohortConfig out;
  out.diseases = c.get_uint("cohort.diseases");
  out.size = c.get_uint("cohort.size");
  out.history_dim = c.get_uint("cohort.history_dim");
  out.seed = c.get_uint("seed");
  out.families = c.get_uint("cohort.families");
  out.characteristic_categories = c.get_uint("cohort.characteristic_categories");
  out.signature_children = c.get_uint("cohort.signature_children");
  out.history_scale = c.get_double("cohort.history_scale");
  out.history_noise = c.get_double("cohort.history_noise");
  out.denial_prob = c.get_double("cohort.denial_prob");
  out.findings = c.get_uint("cohort.findings");
  out.finding_presence = c.get_double("cohort.finding_presence");
  return out;
}

SplitFractions split_fractions(const ExperimentConfig& c) {
  return {c.get_double("split.train"), c.get_double("split.validation"),
          c.get_double("split.test")};
}

EnvConfig env_config(const ExperimentConfig& c) {
  EnvConfig out;
  out.budget = c.get_uint("env.budget");
  out.reward = parse_reward_variant(c.get_string("env.reward"));
  out.pn_denial_reward = c.get_double("env.pn_denial_reward");
  out.seed = c.get_uint("seed");
  return out;
}

PpoConfig ppo_config(const ExperimentConfig& c) {
  PpoConfig out;
  out.gamma = c.get_double("ppo.gamma");
  out.gae_lambda = c.get_double("ppo.gae_lambda");
  out.clip_eps = c.get_double("ppo.clip_eps");
  out.epochs_per_update = c.get_uint("ppo.epochs");
  out.minibatch_size = c.get_uint("ppo.minibatch");
  out.learning_rate = c.get_double("ppo.learning_rate");
  out.entropy_coef = c.get_double("ppo.entropy_coef");
  out.value_coef = c.get_double("ppo.value_coef");
  out.max_grad_norm = c.get_double("ppo.max_grad_norm");
  out.n_envs = c.get_uint("ppo.n_envs");
  out.rollout_steps = c.get_uint("ppo.rollout_steps");
  out.total_steps = c.get_uint("ppo.total_steps");
  out.seed = c.get_uint("seed");
  validate(out);
  return out;
}

ActorCriticShape network_shape(const ExperimentConfig& c) {
  ActorCriticShape out;
  out.trunk_hidden = c.get_sizes("network.trunk_hidden");
  out.head_hidden = c.get_uint("network.head_hidden");
  return out;
}

ScreenerConfig screener_config(const ExperimentConfig& c) {
  ScreenerConfig out;
  out.hidden = c.get_sizes("screener.hidden");
  out.learning_rate = c.get_double("screener.learning_rate");
  out.batch_size = c.get_uint("screener.batch_size");
  out.max_epochs = c.get_uint("screener.max_epochs");
  out.patience = c.get_uint("screener.patience");
  out.seed = c.get_uint("seed");
  return out;
}

NoisyChannelConfig noisy_channel_config(const ExperimentConfig& c) {
  NoisyChannelConfig out;
  out.p_neg_to_pos = c.get_double("channel.p_neg_to_pos");
  out.p_pos_to_neg = c.get_double("channel.p_pos_to_neg");
  out.seed = c.get_uint("seed");
  validate(out);
  return out;
}

LabeledCohortConfig labeled_cohort_config(const ExperimentConfig& c) {
  LabeledCohortConfig out;
  out.size = c.get_uint("labeled.size");
  out.positive_fraction = c.get_double("labeled.positive_fraction");
  out.symptom_prob = c.get_double("labeled.symptom_prob");
  out.finding_presence = c.get_double("labeled.finding_presence");
  out.history_dim = 0;
  out.seed = c.get_uint("seed");
  return out;
}

}  // namespace ddx
