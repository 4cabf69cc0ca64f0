#include "ddx/screen_env.hpp"

#include "ddx/error.hpp"

namespace ddx {
namespace {

void set_state(ScreeningState& s, std::size_t j, SymptomState value) {
  auto* slot = &s.triplets[3 * j];
  slot[0] = slot[1] = slot[2] = 0;
  slot[static_cast<std::size_t>(value)] = 1;
}

}  // namespace

const char* to_string(RewardVariant v) {
  return v == RewardVariant::positive ? "P" : "PN";
}

RewardVariant parse_reward_variant(std::string_view text) {
  if (text == "P" || text == "p") return RewardVariant::positive;
  if (text == "PN" || text == "pn" || text == "P+N") return RewardVariant::positive_negative;
  throw ConfigError("unknown reward variant '" + std::string(text) + "' (expected P or PN)");
}

SymptomState ScreeningState::state(SymptomId j) const {
  const auto* slot = &triplets.at(3 * j.value);
  if (slot[0]) return SymptomState::denied;
  if (slot[1]) return SymptomState::confirmed;
  return SymptomState::unknown;
}

SymptomId draw_disclosure(const PatientRecord& record, const Ontology& ontology, Rng& rng) {
  if (record.oracle_symptoms.size() != ontology.size()) {
    throw ShapeError("record " + record.id + " does not match the ontology");
  }
  std::vector<std::size_t> positives;
  for (std::size_t f = 0; f < ontology.first_layer_count(); ++f) {
    if (record.oracle_symptoms[f]) positives.push_back(f);
  }
  if (positives.empty()) {
    throw ContractViolation("record " + record.id + " has no positive first-layer symptom");
  }
  return SymptomId{positives[rng.index(positives.size())]};
}

ScreeningState disclosed_state(std::vector<double> history, std::size_t symptom_count,
                               SymptomId disclosed) {
  if (disclosed.value >= symptom_count) throw ContractViolation("disclosed symptom out of range");
  ScreeningState s;
  s.history = std::move(history);
  s.triplets.assign(3 * symptom_count, 0);
  for (std::size_t j = 0; j < symptom_count; ++j) s.triplets[3 * j + 2] = 1;
  s.asked.assign(symptom_count, 0);
  set_state(s, disclosed.value, SymptomState::confirmed);
  s.asked[disclosed.value] = 1;
  s.disclosed = disclosed;
  return s;
}

ScreeningState reset(const PatientRecord& record, const Ontology& ontology, Rng& rng) {
  const SymptomId j = draw_disclosure(record, ontology, rng);
  return disclosed_state(record.history, ontology.size(), j);
}

BitVector valid_action_mask(const ScreeningState& s, const Ontology& ontology) {
  const std::size_t M = ontology.size();
  BitVector mask(M, 0);
  for (std::size_t j = 0; j < M; ++j) {
    if (s.asked[j]) continue;
    if (j < ontology.first_layer_count()) {
      mask[j] = 1;
    } else {
      const auto parent = ontology.parent_of(SymptomId{j})->value;
      mask[j] = s.triplets[3 * parent + 1];
    }
  }
  return mask;
}

bool any_valid_action(const ScreeningState& s, const Ontology& ontology) {
  const auto mask = valid_action_mask(s, ontology);
  for (auto b : mask) {
    if (b) return true;
  }
  return false;
}

void apply_answer(ScreeningState& s, SymptomId action, SymptomState answer) {
  set_state(s, action.value, answer);
  s.asked[action.value] = 1;
  ++s.turn;
}

StepResult step(ScreeningState& s, SymptomId action, const PatientRecord& record,
                const Ontology& ontology, const EnvConfig& config) {
  if (action.value >= ontology.size()) {
    throw ContractViolation("action " + std::to_string(action.value) + " out of range");
  }
  if (s.turn >= config.budget) throw ContractViolation("episode already finished");
  const auto mask = valid_action_mask(s, ontology);
  if (!mask[action.value]) {
    throw ContractViolation("masked action " + std::to_string(action.value) + " (" +
                            ontology.node(action).name + ")");
  }
  StepResult r;
  r.answer = answer_symptom_query(record, action);
  apply_answer(s, action, r.answer);
  if (r.answer == SymptomState::confirmed) {
    r.reward = 1.0;
  } else if (config.reward == RewardVariant::positive_negative &&
             record.explicit_denials[action.value]) {
    r.reward = config.pn_denial_reward;
  }
  r.done = s.turn >= config.budget || !any_valid_action(s, ontology);
  return r;
}

std::vector<double> observe(const ScreeningState& s) {
  std::vector<double> obs;
  obs.reserve(s.history.size() + s.triplets.size());
  obs.insert(obs.end(), s.history.begin(), s.history.end());
  for (auto b : s.triplets) obs.push_back(static_cast<double>(b));
  return obs;
}

Evidence evidence_from(const ScreeningState& s, bool include_history) {
  Evidence e;
  e.symptoms.resize(s.symptom_count());
  for (std::size_t j = 0; j < s.symptom_count(); ++j) e.symptoms[j] = s.state(SymptomId{j});
  if (include_history) e.history = s.history;
  return e;
}

}  // namespace ddx
