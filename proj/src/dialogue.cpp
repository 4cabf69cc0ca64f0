#include "ddx/dialogue.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {

using Json = nlohmann::ordered_json;

const char* to_string(Speaker s) { return s == Speaker::doctor ? "doctor" : "patient"; }

const char* to_string(TurnKind k) {
  switch (k) {
    case TurnKind::disclosure: return "disclosure";
    case TurnKind::question: return "question";
    case TurnKind::answer: return "answer";
    case TurnKind::ranking: return "ranking";
    case TurnKind::conclusion: return "conclusion";
    case TurnKind::diagnosis: return "diagnosis";
  }
  return "question";
}

const char* to_string(Phase p) { return p == Phase::screening ? "screening" : "differential"; }

const char* to_string(FinalDecision d) {
  switch (d) {
    case FinalDecision::confirm: return "confirm";
    case FinalDecision::exclude_all: return "exclude-all";
    case FinalDecision::screening_only: return "screening-only";
  }
  return "screening-only";
}

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view text, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (text == to_string(v)) return v;
  }
  throw FormatError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr Speaker kSpeakers[] = {Speaker::doctor, Speaker::patient};
constexpr TurnKind kKinds[] = {TurnKind::disclosure, TurnKind::question, TurnKind::answer,
                               TurnKind::ranking, TurnKind::conclusion, TurnKind::diagnosis};
constexpr Phase kPhases[] = {Phase::screening, Phase::differential};
constexpr FinalDecision kDecisions[] = {FinalDecision::confirm, FinalDecision::exclude_all,
                                        FinalDecision::screening_only};

}  // namespace

void Transcript::add(Speaker speaker, TurnKind kind, Phase phase, std::string ref,
                     std::string text, std::string value) {
  turns.push_back(Turn{turns.size(), speaker, kind, phase, std::move(ref), std::move(text),
                       std::move(value)});
}

std::size_t Transcript::count(TurnKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [&](const Turn& t) { return t.kind == kind; }));
}

std::vector<std::string> check_transcript(const Transcript& t) {
  std::vector<std::string> problems;
  auto problem = [&](std::size_t i, const std::string& what) {
    problems.push_back("turn " + std::to_string(i) + ": " + what);
  };
  bool open_question = false;
  std::string open_ref;
  std::size_t terminals = 0;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const Turn& turn = t.turns[i];
    if (turn.index != i) problem(i, "index " + std::to_string(turn.index) + " out of order");
    if (i > 0 && turn.phase == Phase::screening && t.turns[i - 1].phase == Phase::differential) {
      problem(i, "screening turn after the differential phase");
    }
    if (terminals > 0) problem(i, "turn after the final diagnosis");
    switch (turn.kind) {
      case TurnKind::question:
        if (open_question) problem(i, "question follows an unanswered question");
        open_question = true;
        open_ref = turn.ref;
        break;
      case TurnKind::answer:
        if (!open_question) problem(i, "answer without a question");
        else if (turn.ref != open_ref) problem(i, "answer refers to '" + turn.ref + "'");
        open_question = false;
        break;
      case TurnKind::diagnosis:
        ++terminals;
        [[fallthrough]];
      default:
        if (open_question) problem(i, "question left unanswered");
        open_question = false;
        break;
    }
  }
  // A screening-only dialogue ends in its ranking instead of a diagnosis.
  const bool screening_only = terminals == 0 && !t.turns.empty() &&
                              t.turns.back().kind == TurnKind::ranking &&
                              t.count(TurnKind::ranking) == 1;
  if (terminals != 1 && !screening_only) {
    problems.push_back("expected exactly one diagnosis turn, found " + std::to_string(terminals));
  }
  return problems;
}

std::string serialize_transcripts(std::span<const Transcript> transcripts) {
  std::string out;
  for (const auto& t : transcripts) {
    Json header;
    header["consultation"] = t.consultation_id;
    header["record"] = t.record_id;
    header["turns"] = t.turns.size();
    out += header.dump() + '\n';
    for (const auto& turn : t.turns) {
      Json j;
      j["index"] = turn.index;
      j["speaker"] = to_string(turn.speaker);
      j["kind"] = to_string(turn.kind);
      j["phase"] = to_string(turn.phase);
      j["ref"] = turn.ref;
      j["text"] = turn.text;
      j["value"] = turn.value;
      out += j.dump() + '\n';
    }
  }
  return out;
}

std::vector<Transcript> parse_transcripts(std::string_view text) {
  std::vector<Transcript> out;
  const auto lines = split_lines(text);
  std::size_t i = 0;
  auto next_json = [&](const char* what) {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i >= lines.size()) throw FormatError(std::string("transcript file ends before ") + what);
    try {
      return Json::parse(lines[i++]);
    } catch (const Json::exception& e) {
      throw FormatError("transcript line " + std::to_string(i) + ": " + e.what());
    }
  };
  for (;;) {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i >= lines.size()) break;
    try {
      const Json header = next_json("a header");
      Transcript t;
      t.consultation_id = header.at("consultation").get<std::string>();
      t.record_id = header.at("record").get<std::string>();
      const auto n = header.at("turns").get<std::size_t>();
      for (std::size_t k = 0; k < n; ++k) {
        const Json j = next_json("the announced turns");
        Turn turn;
        turn.index = j.at("index").get<std::size_t>();
        turn.speaker = parse_enum(j.at("speaker").get<std::string>(), kSpeakers, "speaker");
        turn.kind = parse_enum(j.at("kind").get<std::string>(), kKinds, "turn kind");
        turn.phase = parse_enum(j.at("phase").get<std::string>(), kPhases, "phase");
        turn.ref = j.at("ref").get<std::string>();
        turn.text = j.at("text").get<std::string>();
        turn.value = j.at("value").get<std::string>();
        t.turns.push_back(std::move(turn));
      }
      out.push_back(std::move(t));
    } catch (const Json::exception& e) {
      throw FormatError("transcript line " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> RecordPatient::history(std::size_t dim) const {
  if (record_->history.size() != dim) {
    throw ShapeError("record " + record_->id + " has history of length " +
                     std::to_string(record_->history.size()) + ", expected " +
                     std::to_string(dim));
  }
  return record_->history;
}

SymptomId RecordPatient::disclose(const Ontology& ontology, Rng& rng) {
  return draw_disclosure(*record_, ontology, rng);
}

SymptomState RecordPatient::answer_symptom(SymptomId symptom, const std::string&) {
  return answer_symptom_query(*record_, symptom);
}

bool RecordPatient::answer_node(const DecisionNode& node, const std::string&) {
  return evaluate(node.when, *record_, *ontology_);
}

std::string ConsolePatient::read_line(const std::string& prompt) {
  *out_ << prompt << std::flush;
  std::string line;
  if (!std::getline(*in_, line)) throw ChannelError("console input ended");
  return std::string(trim(line));
}

SymptomId ConsolePatient::disclose(const Ontology& ontology, Rng&) {
  std::string options;
  for (std::size_t f = 0; f < ontology.first_layer_count(); ++f) {
    options += (f ? ", " : "") + ontology.node(SymptomId{f}).name;
  }
  for (;;) {
    const auto name = read_line("What brings you in today? (" + options + ")\n> ");
    if (auto id = ontology.find(name); id && ontology.is_first_layer(*id)) return *id;
    *out_ << "Please name one of the listed complaints.\n";
  }
}

SymptomState ConsolePatient::answer_symptom(SymptomId, const std::string& question) {
  for (;;) {
    const auto line = read_line(question + " [y/n/?] ");
    if (line == "y" || line == "yes") return SymptomState::confirmed;
    if (line == "n" || line == "no") return SymptomState::denied;
    if (line == "?" || line.empty()) return SymptomState::unknown;
    *out_ << "Please answer y, n or ?.\n";
  }
}

bool ConsolePatient::answer_node(const DecisionNode&, const std::string& question) {
  for (;;) {
    const auto line = read_line(question + " [y/n] ");
    if (line == "y" || line == "yes") return true;
    // an unknown answer counts as no
    if (line == "n" || line == "no" || line == "?" || line.empty()) return false;
    *out_ << "Please answer y or n.\n";
  }
}

std::string symptom_question(const Ontology& ontology, SymptomId symptom) {
  return "Do you have " + ontology.node(symptom).name + "?";
}

std::string symptom_reply(SymptomState state) {
  switch (state) {
    case SymptomState::confirmed: return "Yes.";
    case SymptomState::denied: return "No.";
    case SymptomState::unknown: return "I'm not sure.";
  }
  return "I'm not sure.";
}

namespace {

std::string ranking_text(const Ranking& ranking, std::span<const std::string> names) {
  std::string text = "Most likely:";
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranking.order.size()); ++i) {
    const auto k = ranking.order[i];
    char prob[32];
    std::snprintf(prob, sizeof prob, "%.3f", ranking.probabilities[k]);
    text += std::string(i ? "," : "") + " " + names[k] + " (" + prob + ")";
  }
  return text;
}

std::string join(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

RunTrace run_logged(PatientAgent& patient, const ProcedureGraph& graph, SemanticChannel& channel,
                    Transcript& t) {
  RunTrace trace = run(
      graph, [&](const DecisionNode& n) { return patient.answer_node(n, n.ask); }, channel);
  for (const auto& step : trace.steps) {
    t.add(Speaker::doctor, TurnKind::question, Phase::differential, step.node, step.question, "");
    t.add(Speaker::patient, TurnKind::answer, Phase::differential, step.node,
          step.truth ? "Yes." : "No.", step.answer ? "yes" : "no");
  }
  return trace;
}

std::string outcome_text(Outcome o, const std::string& disease) {
  switch (o) {
    case Outcome::confirm: return "The procedure confirms " + disease + ".";
    case Outcome::exclude: return "The procedure excludes " + disease + ".";
    case Outcome::failure: return "No conclusion on " + disease + " within the question limit.";
  }
  return "";
}

}  // namespace

ScreeningDialogue run_screening_dialogue(PatientAgent& patient, const InquiryPolicy& policy,
                                         const Mlp& screener, const Ontology& ontology,
                                         std::span<const std::string> disease_names,
                                         SemanticChannel& channel, const EnvConfig& env, Rng& rng,
                                         std::vector<ScreeningState>* trajectory) {
  const std::size_t M = ontology.size();
  if (screener.input_dim() < 3 * M) {
    throw ShapeError("screener input is narrower than the symptom triplets");
  }
  if (screener.output_dim() != disease_names.size()) {
    throw ShapeError("screener predicts " + std::to_string(screener.output_dim()) +
                     " diseases but " + std::to_string(disease_names.size()) + " are named");
  }
  ScreeningDialogue out;
  out.transcript.consultation_id = patient.id();
  out.transcript.record_id = patient.id();
  auto& t = out.transcript;

  const SymptomId opening = patient.disclose(ontology, rng);
  ScreeningState& s = out.observed_state;
  s = disclosed_state(patient.history(screener.input_dim() - 3 * M), M, opening);
  const std::string& opening_name = ontology.node(opening).name;
  t.add(Speaker::patient, TurnKind::disclosure, Phase::screening, opening_name,
        "I have " + opening_name + ".", to_string(SymptomState::confirmed));
  if (trajectory) trajectory->push_back(s);

  while (s.turn < env.budget) {
    const BitVector mask = valid_action_mask(s, ontology);
    if (popcount(mask) == 0) break;
    const SymptomId action = policy.choose(s, mask, rng);
    if (action.value >= M || !mask[action.value]) {
      throw ContractViolation("policy chose masked symptom " + std::to_string(action.value));
    }
    const std::string& name = ontology.node(action).name;
    const std::string question = channel.render_question(symptom_question(ontology, action));
    t.add(Speaker::doctor, TurnKind::question, Phase::screening, name, question, "");
    const SymptomState truth = patient.answer_symptom(action, question);
    const SymptomState observed = channel.deliver_symptom(question, truth);
    t.add(Speaker::patient, TurnKind::answer, Phase::screening, name, symptom_reply(truth),
          to_string(observed));
    apply_answer(s, action, observed);
    ++out.questions;
    if (trajectory) trajectory->push_back(s);
  }

  out.ranking = predict_ranking(screener, observe(s));
  std::vector<std::string> ordered;
  for (auto k : out.ranking.order) ordered.push_back(disease_names[k]);
  t.add(Speaker::doctor, TurnKind::ranking, Phase::screening, ordered.front(),
        ranking_text(out.ranking, disease_names), join(ordered));
  return out;
}

DifferentialDialogue run_differential_dialogue(PatientAgent& patient, const ProcedureGraph& graph,
                                               SemanticChannel& channel) {
  DifferentialDialogue out;
  out.transcript.consultation_id = patient.id();
  out.transcript.record_id = patient.id();
  out.trace = run_logged(patient, graph, channel, out.transcript);
  out.transcript.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, graph.disease,
                     outcome_text(out.trace.outcome, graph.disease),
                     to_string(out.trace.outcome));
  return out;
}

DifferentialDialogue run_differential_dialogue(const PatientRecord& record,
                                               const ProcedureGraph& graph,
                                               const Ontology& ontology,
                                               SemanticChannel& channel) {
  RecordPatient patient(record, ontology);
  return run_differential_dialogue(patient, graph, channel);
}

std::size_t ConsultationResult::differential_questions() const {
  std::size_t n = 0;
  for (const auto& a : attempts) n += a.questions;
  return n;
}

void validate(const ConsultationSetup& s) {
  if (!s.ontology || !s.policy || !s.screener) {
    throw ContractViolation("consultation needs an ontology, a policy and a screener");
  }
  if (s.disease_names.empty()) throw ConfigError("consultation needs disease names");
  if (s.k_candidates == 0) throw ConfigError("k_candidates must be at least 1");
  for (const auto& [disease, graph] : s.procedures) {
    if (graph.disease != disease) {
      throw ConfigError("procedure '" + graph.name + "' is for '" + graph.disease +
                        "' but registered under '" + disease + "'");
    }
  }
}

Consultation run_full_consultation(PatientAgent& patient, const ConsultationSetup& setup,
                                   SemanticChannel& channel, Rng& rng) {
  validate(setup);
  Consultation out;
  auto screening = run_screening_dialogue(patient, *setup.policy, *setup.screener, *setup.ontology,
                                          setup.disease_names, channel, setup.env, rng);
  auto& r = out.result;
  auto& t = out.transcript;
  t = std::move(screening.transcript);
  r.record_id = patient.id();
  r.screening_questions = screening.questions;
  for (auto k : screening.ranking.order) {
    r.ranking.push_back(setup.disease_names[k]);
    r.ranking_probabilities.push_back(screening.ranking.probabilities[k]);
  }

  const std::size_t k = std::min(setup.k_candidates, r.ranking.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& disease = r.ranking[i];
    auto it = setup.procedures.find(disease);
    if (it == setup.procedures.end()) {
      r.skipped.push_back(disease);
      continue;
    }
    const RunTrace trace = run_logged(patient, it->second, channel, t);
    t.add(Speaker::doctor, TurnKind::conclusion, Phase::differential, disease,
          outcome_text(trace.outcome, disease), to_string(trace.outcome));
    r.attempts.push_back({disease, trace.outcome, trace.questions_asked()});
    if (trace.outcome == Outcome::confirm) {
      r.decision = FinalDecision::confirm;
      r.confirmed_disease = disease;
      break;
    }
  }
  if (r.attempts.empty()) {
    r.decision = FinalDecision::screening_only;
    t.add(Speaker::doctor, TurnKind::diagnosis, Phase::screening, r.ranking.front(),
          "Screening suggests " + r.ranking.front() + "; no procedure is available to confirm it.",
          to_string(r.decision));
  } else if (r.decision == FinalDecision::confirm) {
    t.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, *r.confirmed_disease,
          "Diagnosis: " + *r.confirmed_disease + ".", to_string(r.decision));
  } else {
    r.decision = FinalDecision::exclude_all;
    t.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, r.attempts.back().disease,
          "None of the suspected diseases was confirmed.", to_string(r.decision));
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

BatchOutput batch_run(std::span<const PatientRecord> records, const ConsultationSetup& setup,
                      const ChannelFactory& channels, std::size_t parallelism) {
  validate(setup);
  BatchOutput out;
  out.consultations.resize(records.size());
  std::mutex errors_mutex;
  parallel_for(records.size(), parallelism, [&](std::size_t i) {
    const PatientRecord& record = records[i];
    try {
      Rng rng(derive_seed(setup.seed, record.id));
      auto channel = channels(derive_seed(setup.seed, "channel:" + record.id));
      RecordPatient patient(record, *setup.ontology);
      Consultation c = run_full_consultation(patient, setup, *channel, rng);
      if (record.label < setup.disease_names.size()) {
        c.result.true_disease = setup.disease_names[record.label];
      }
      out.consultations[i] = std::move(c);
    } catch (const std::exception& e) {
      std::lock_guard lock(errors_mutex);
      out.errors.push_back({i, record.id, e.what()});
    }
  });
  std::sort(out.errors.begin(), out.errors.end(),
            [](const RecordError& a, const RecordError& b) { return a.index < b.index; });
  return out;
}

std::string to_json_line(const ConsultationResult& r) {
  Json j;
  j["record"] = r.record_id;
  j["true_disease"] = r.true_disease ? Json(*r.true_disease) : Json(nullptr);
  j["ranking"] = r.ranking;
  j["probabilities"] = r.ranking_probabilities;
  j["screening_questions"] = r.screening_questions;
  Json attempts = Json::array();
  for (const auto& a : r.attempts) {
    Json aj;
    aj["disease"] = a.disease;
    aj["outcome"] = to_string(a.outcome);
    aj["questions"] = a.questions;
    attempts.push_back(std::move(aj));
  }
  j["attempts"] = std::move(attempts);
  j["skipped"] = r.skipped;
  j["decision"] = to_string(r.decision);
  j["confirmed"] = r.confirmed_disease ? Json(*r.confirmed_disease) : Json(nullptr);
  return j.dump();
}

ConsultationResult parse_consultation_result(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    ConsultationResult r;
    r.record_id = j.at("record").get<std::string>();
    if (!j.at("true_disease").is_null()) r.true_disease = j["true_disease"].get<std::string>();
    r.ranking = j.at("ranking").get<std::vector<std::string>>();
    r.ranking_probabilities = j.at("probabilities").get<std::vector<double>>();
    r.screening_questions = j.at("screening_questions").get<std::size_t>();
    for (const auto& aj : j.at("attempts")) {
      r.attempts.push_back({aj.at("disease").get<std::string>(),
                            parse_outcome(aj.at("outcome").get<std::string>()),
                            aj.at("questions").get<std::size_t>()});
    }
    r.skipped = j.at("skipped").get<std::vector<std::string>>();
    r.decision = parse_enum(j.at("decision").get<std::string>(), kDecisions, "decision");
    if (!j.at("confirmed").is_null()) r.confirmed_disease = j["confirmed"].get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("consultation result: ") + e.what());
  }
}

}  // namespace ddx
