#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ddx/cohort.hpp"
#include "ddx/ontology.hpp"
#include "ddx/rng.hpp"
#include "ddx/types.hpp"

namespace ddx {

enum class RewardVariant { positive, positive_negative };

const char* to_string(RewardVariant v);
RewardVariant parse_reward_variant(std::string_view text);

struct EnvConfig {
  std::size_t budget = 10;  // questions after the disclosure
  RewardVariant reward = RewardVariant::positive;
  double pn_denial_reward = 0.2;
  std::uint64_t seed = 0;
};

// Observation layout: [history (d), triplets (3M)] where symptom j occupies
// slots 3j..3j+2 as [denied, confirmed, unknown].
struct ScreeningState {
  std::vector<double> history;
  BitVector triplets;
  BitVector asked;
  std::size_t turn = 0;
  std::optional<SymptomId> disclosed;

  std::size_t symptom_count() const { return asked.size(); }
  SymptomState state(SymptomId j) const;
  bool operator==(const ScreeningState&) const = default;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  SymptomState answer = SymptomState::unknown;
};

// All symptoms unknown except one present first-layer symptom, chosen
// uniformly among the record's positives, which is confirmed and marked asked.
ScreeningState reset(const PatientRecord& record, const Ontology& ontology, Rng& rng);

// The two halves of reset: which symptom the patient opens with, and the
// state after that opening.
SymptomId draw_disclosure(const PatientRecord& record, const Ontology& ontology, Rng& rng);
ScreeningState disclosed_state(std::vector<double> history, std::size_t symptom_count,
                               SymptomId disclosed);

// mask[j] = 1 iff j is unasked and either first-layer or its parent is confirmed.
BitVector valid_action_mask(const ScreeningState& state, const Ontology& ontology);
bool any_valid_action(const ScreeningState& state, const Ontology& ontology);

// Records an answer for an asked symptom and advances the turn. Shared by the
// environment and the dialogue doctor (who applies channel-observed answers).
void apply_answer(ScreeningState& state, SymptomId action, SymptomState answer);

// Throws ContractViolation for masked actions. done fires at turn == budget or
// when no valid action remains.
StepResult step(ScreeningState& state, SymptomId action, const PatientRecord& record,
                const Ontology& ontology, const EnvConfig& config);

std::vector<double> observe(const ScreeningState& state);

// Evidence in the posterior's terms: triplets decoded, history optional.
Evidence evidence_from(const ScreeningState& state, bool include_history = true);

}  // namespace ddx
