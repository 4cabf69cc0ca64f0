#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddx/channel.hpp"
#include "ddx/cohort.hpp"
#include "ddx/neural.hpp"
#include "ddx/procedure.hpp"
#include "ddx/rl_train.hpp"
#include "ddx/screen_env.hpp"
#include "ddx/screener.hpp"

namespace ddx {

enum class Speaker { doctor, patient };
// conclusion closes one procedure run inside a longer consultation; the single
// diagnosis turn closes the whole transcript.
enum class TurnKind { disclosure, question, answer, ranking, conclusion, diagnosis };
enum class Phase { screening, differential };

const char* to_string(Speaker s);
const char* to_string(TurnKind k);
const char* to_string(Phase p);

struct Turn {
  std::size_t index = 0;
  Speaker speaker = Speaker::doctor;
  TurnKind kind = TurnKind::question;
  Phase phase = Phase::screening;
  std::string ref;    // symptom name, node id or disease name
  std::string text;   // utterance
  std::string value;  // what the doctor parsed from it

  bool operator==(const Turn&) const = default;
};

struct Transcript {
  std::string consultation_id;
  std::string record_id;
  std::vector<Turn> turns;

  void add(Speaker speaker, TurnKind kind, Phase phase, std::string ref, std::string text,
           std::string value);
  std::size_t count(TurnKind kind) const;
  bool operator==(const Transcript&) const = default;
};

// Alternation, ordering and single-terminal checks; returns the problems found.
std::vector<std::string> check_transcript(const Transcript& transcript);

// One header line per consultation followed by one line per turn.
std::string serialize_transcripts(std::span<const Transcript> transcripts);
std::vector<Transcript> parse_transcripts(std::string_view text);

// The side of the conversation that holds the truth.
class PatientAgent {
 public:
  virtual ~PatientAgent() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> history(std::size_t dim) const = 0;
  virtual SymptomId disclose(const Ontology& ontology, Rng& rng) = 0;
  virtual SymptomState answer_symptom(SymptomId symptom, const std::string& question) = 0;
  virtual bool answer_node(const DecisionNode& node, const std::string& question) = 0;
};

// Answers from a patient record; the disclosure matches the environment's.
class RecordPatient final : public PatientAgent {
 public:
  RecordPatient(const PatientRecord& record, const Ontology& ontology)
      : record_(&record), ontology_(&ontology) {}
  std::string id() const override { return record_->id; }
  std::vector<double> history(std::size_t dim) const override;
  SymptomId disclose(const Ontology& ontology, Rng& rng) override;
  SymptomState answer_symptom(SymptomId symptom, const std::string& question) override;
  bool answer_node(const DecisionNode& node, const std::string& question) override;

 private:
  const PatientRecord* record_;
  const Ontology* ontology_;
};

// A person typing answers: y / n / ? for symptoms, y / n for procedure steps.
class ConsolePatient final : public PatientAgent {
 public:
  ConsolePatient(std::istream& in, std::ostream& out) : in_(&in), out_(&out) {}
  std::string id() const override { return "console"; }
  std::vector<double> history(std::size_t dim) const override {
    return std::vector<double>(dim, 0.0);
  }
  SymptomId disclose(const Ontology& ontology, Rng& rng) override;
  SymptomState answer_symptom(SymptomId symptom, const std::string& question) override;
  bool answer_node(const DecisionNode& node, const std::string& question) override;

 private:
  std::string read_line(const std::string& prompt);

  std::istream* in_;
  std::ostream* out_;
};

std::string symptom_question(const Ontology& ontology, SymptomId symptom);
std::string symptom_reply(SymptomState state);

struct ScreeningDialogue {
  Transcript transcript;
  Ranking ranking;
  ScreeningState observed_state;  // the doctor's view, channel effects included
  std::size_t questions = 0;
};

// Disclosure, up to env.budget question/answer pairs chosen by the policy on
// the doctor's observed state, then a ranking from the screener. When
// trajectory is given it receives the observed state after the disclosure and
// after every answer.
ScreeningDialogue run_screening_dialogue(PatientAgent& patient, const InquiryPolicy& policy,
                                         const Mlp& screener, const Ontology& ontology,
                                         std::span<const std::string> disease_names,
                                         SemanticChannel& channel, const EnvConfig& env, Rng& rng,
                                         std::vector<ScreeningState>* trajectory = nullptr);

struct DifferentialDialogue {
  Transcript transcript;
  RunTrace trace;
};

// Question/answer pairs along the procedure, closed by one diagnosis turn
// carrying the outcome.
DifferentialDialogue run_differential_dialogue(PatientAgent& patient, const ProcedureGraph& graph,
                                               SemanticChannel& channel);
DifferentialDialogue run_differential_dialogue(const PatientRecord& record,
                                               const ProcedureGraph& graph,
                                               const Ontology& ontology,
                                               SemanticChannel& channel);

enum class FinalDecision { confirm, exclude_all, screening_only };

const char* to_string(FinalDecision d);

struct ProcedureAttempt {
  std::string disease;
  Outcome outcome = Outcome::failure;
  std::size_t questions = 0;

  bool operator==(const ProcedureAttempt&) const = default;
};

struct ConsultationResult {
  std::string record_id;
  std::optional<std::string> true_disease;
  std::vector<std::string> ranking;  // disease names, best first
  std::vector<double> ranking_probabilities;
  std::size_t screening_questions = 0;
  std::vector<ProcedureAttempt> attempts;
  std::vector<std::string> skipped;  // top-k diseases without a procedure
  FinalDecision decision = FinalDecision::screening_only;
  std::optional<std::string> confirmed_disease;

  std::size_t differential_questions() const;
  bool operator==(const ConsultationResult&) const = default;
};

struct ConsultationSetup {
  const Ontology* ontology = nullptr;
  const InquiryPolicy* policy = nullptr;
  const Mlp* screener = nullptr;
  std::vector<std::string> disease_names;
  std::map<std::string, ProcedureGraph> procedures;  // by disease name
  EnvConfig env;
  std::size_t k_candidates = 1;
  std::uint64_t seed = 1;
};

void validate(const ConsultationSetup& setup);

struct Consultation {
  ConsultationResult result;
  Transcript transcript;
};

// Screening, then the procedures of the top k_candidates diseases in rank
// order until one confirms.
Consultation run_full_consultation(PatientAgent& patient, const ConsultationSetup& setup,
                                   SemanticChannel& channel, Rng& rng);

struct RecordError {
  std::size_t index = 0;
  std::string record_id;
  std::string message;
};

struct BatchOutput {
  std::vector<std::optional<Consultation>> consultations;  // input order
  std::vector<RecordError> errors;
};

// Each consultation draws its randomness and its channel from streams derived
// from (setup.seed, record id), so results do not depend on parallelism.
BatchOutput batch_run(std::span<const PatientRecord> records, const ConsultationSetup& setup,
                      const ChannelFactory& channels, std::size_t parallelism = 1);

// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

std::string to_json_line(const ConsultationResult& result);
ConsultationResult parse_consultation_result(std::string_view line);

}  // namespace ddx
