#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "ddx/procedure.hpp"

namespace ddx {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::confirm: return "confirm";
    case Outcome::exclude: return "exclude";
    case Outcome::failure: return "failure";
  }
  return "failure";
}

Outcome parse_outcome(std::string_view text) {
  if (text == "confirm") return Outcome::confirm;
  if (text == "exclude") return Outcome::exclude;
  if (text == "failure") return Outcome::failure;
  throw FormatError("unknown outcome '" + std::string(text) + "'");
}

namespace {

const DecisionNode& lookup(const ProcedureGraph& g, const std::string& id) {
  auto it = g.nodes.find(id);
  if (it == g.nodes.end()) {
    throw ContractViolation("procedure '" + g.name + "' references undefined node '" + id + "'");
  }
  return it->second;
}

Outcome outcome_of(Terminal t) { return t == Terminal::confirm ? Outcome::confirm : Outcome::exclude; }

}  // namespace

RunTrace run(const ProcedureGraph& g, const PatientRecord& record, const Ontology& ontology,
             SemanticChannel& channel, std::size_t max_questions) {
  return run(
      g, [&](const DecisionNode& n) { return evaluate(n.when, record, ontology); }, channel,
      max_questions);
}

RunTrace run(const ProcedureGraph& g, const NodeAnswerer& patient, SemanticChannel& channel,
             std::size_t max_questions) {
  RunTrace trace;
  Target current = g.start;
  for (;;) {
    if (const auto* term = std::get_if<Terminal>(&current)) {
      trace.outcome = outcome_of(*term);
      return trace;
    }
    if (trace.steps.size() >= max_questions) {
      trace.outcome = Outcome::failure;
      return trace;
    }
    const DecisionNode& n = lookup(g, std::get<std::string>(current));
    TraceStep step;
    step.node = n.id;
    step.question = channel.render_question(n.ask);
    step.truth = patient(n);
    step.answer = channel.deliver_answer(step.question, step.truth);
    current = step.answer ? n.yes : n.no;
    trace.steps.push_back(std::move(step));
  }
}

Terminal truth_table_outcome(const ProcedureGraph& g,
                             const std::map<std::string, bool>& assignment) {
  Target current = g.start;
  // A valid graph visits each node at most once.
  for (std::size_t hops = 0; hops <= g.nodes.size(); ++hops) {
    if (const auto* term = std::get_if<Terminal>(&current)) return *term;
    const DecisionNode& n = lookup(g, std::get<std::string>(current));
    auto it = assignment.find(n.id);
    if (it == assignment.end()) {
      throw ContractViolation("assignment has no answer for node '" + n.id + "'");
    }
    current = it->second ? n.yes : n.no;
  }
  throw ContractViolation("procedure '" + g.name + "' contains a cycle");
}

std::map<std::string, bool> induced_answers(const ProcedureGraph& g, const PatientRecord& record,
                                            const Ontology& ontology) {
  std::map<std::string, bool> answers;
  for (const auto& [id, n] : g.nodes) answers[id] = evaluate(n.when, record, ontology);
  return answers;
}

std::size_t longest_path(const ProcedureGraph& g) {
  std::map<std::string, std::size_t> memo;
  std::set<std::string> active;
  std::function<std::size_t(const Target&)> depth = [&](const Target& t) -> std::size_t {
    const auto* id = std::get_if<std::string>(&t);
    if (id == nullptr) return 0;
    if (auto it = memo.find(*id); it != memo.end()) return it->second;
    if (!active.insert(*id).second) {
      throw ContractViolation("procedure '" + g.name + "' contains a cycle");
    }
    const DecisionNode& n = lookup(g, *id);
    const std::size_t d = 1 + std::max(depth(n.yes), depth(n.no));
    active.erase(*id);
    memo[*id] = d;
    return d;
  };
  return depth(g.start);
}

namespace {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Spread values around every threshold the procedure tests, so both branches
// of each comparison occur.
std::map<std::string, ValueRange> finding_ranges(const ProcedureGraph& g,
                                                 std::set<std::string>& flags) {
  std::map<std::string, std::vector<double>> constants;
  for (const auto& [_, n] : g.nodes) {
    for_each_atom(n.when, [&](const Atom& a) {
      if (a.kind == Atom::Kind::finding) constants[a.name].push_back(a.constant);
      if (a.kind == Atom::Kind::flag) flags.insert(a.name);
    });
  }
  std::map<std::string, ValueRange> ranges;
  for (const auto& [name, cs] : constants) {
    const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
    const double spread = std::max({*hi - *lo, std::abs(*hi), 1.0});
    ranges[name] = {*lo - 0.6 * spread, *hi + 0.6 * spread};
  }
  return ranges;
}

}  // namespace

Cohort generate_labeled_cohort(const ProcedureGraph& g, const Ontology& ontology,
                               const LabeledCohortConfig& config) {
  if (config.size == 0) throw ConfigError("labeled cohort size must be positive");
  for (double p : {config.positive_fraction, config.symptom_prob, config.finding_presence}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("labeled cohort probabilities must lie in [0, 1]");
  }
  if (config.symptom_prob == 0.0) throw ConfigError("symptom_prob must be positive");
  if (has_errors(validate(g, Vocabulary{&ontology, std::nullopt, std::nullopt, true}))) {
    throw ValidationError("procedure '" + g.name + "' does not validate against the ontology");
  }
  if (longest_path(g) > kMaxDifferentialQuestions) {
    throw ValidationError("procedure '" + g.name + "' can exceed the question cap");
  }

  std::set<std::string> flags;
  const auto ranges = finding_ranges(g, flags);
  const std::size_t want_pos =
      static_cast<std::size_t>(std::llround(config.positive_fraction * config.size));
  const std::size_t want[2] = {config.size - want_pos, want_pos};
  std::size_t have[2] = {0, 0};

  Cohort cohort;
  cohort.symptom_count = ontology.size();
  cohort.first_layer_count = ontology.first_layer_count();
  cohort.history_dim = config.history_dim;
  cohort.seed = config.seed;
  cohort.disease_names = {"not_" + g.disease, g.disease};

  Rng rng(config.seed);
  const std::size_t max_attempts = 1000 * config.size + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && cohort.records.size() < config.size;
       ++attempt) {
    PatientRecord r;
    r.oracle_symptoms.assign(ontology.size(), 0);
    r.explicit_denials.assign(ontology.size(), 0);
    bool any_first = false;
    while (!any_first) {
      for (std::size_t f = 0; f < ontology.first_layer_count(); ++f) {
        r.oracle_symptoms[f] = rng.bernoulli(config.symptom_prob) ? 1 : 0;
        any_first = any_first || r.oracle_symptoms[f] != 0;
      }
    }
    for (std::size_t f = 0; f < ontology.first_layer_count(); ++f) {
      for (SymptomId child : ontology.children_of(SymptomId{f})) {
        const bool present = r.oracle_symptoms[f] != 0 && rng.bernoulli(config.symptom_prob);
        r.oracle_symptoms[child.value] = present ? 1 : 0;
      }
    }
    r.history.resize(config.history_dim);
    for (double& h : r.history) h = rng.normal();
    for (const auto& [name, range] : ranges) {
      if (rng.bernoulli(config.finding_presence)) {
        r.findings[name] = std::round(rng.uniform(range.lo, range.hi) * 100.0) / 100.0;
      }
    }
    for (const auto& name : flags) {
      if (rng.bernoulli(config.finding_presence)) r.findings[name] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    const Terminal verdict = truth_table_outcome(g, induced_answers(g, r, ontology));
    const std::size_t label = verdict == Terminal::confirm ? 1 : 0;
    if (have[label] >= want[label]) continue;
    ++have[label];
    r.label = label;
    char id[32];
    std::snprintf(id, sizeof id, "q%06zu", cohort.records.size());
    r.id = id;
    cohort.records.push_back(std::move(r));
  }
  if (cohort.records.size() < config.size) {
    throw ValidationError("could not balance labels for procedure '" + g.name +
                          "': it rarely reaches one of its verdicts");
  }
  return cohort;
}

}  // namespace ddx
