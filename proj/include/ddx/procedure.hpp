#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ddx/channel.hpp"
#include "ddx/cohort.hpp"
#include "ddx/error.hpp"
#include "ddx/ontology.hpp"
#include "ddx/predicate.hpp"

namespace ddx {

enum class Terminal { confirm, exclude };

// Either a terminal keyword or the id of another node.
using Target = std::variant<Terminal, std::string>;

struct DecisionNode {
  std::string id;
  std::string ask;
  Predicate when;
  Target yes = Terminal::exclude;
  Target no = Terminal::exclude;
  SourcePos pos;
  SourcePos yes_pos;
  SourcePos no_pos;

  // Structural equality; source positions are ignored.
  bool operator==(const DecisionNode& o) const {
    return id == o.id && ask == o.ask && when == o.when && yes == o.yes && no == o.no;
  }
};

// Rooted binary-branching DAG of yes/no questions ending in confirm/exclude.
struct ProcedureGraph {
  std::string name;
  std::string disease;
  std::string start;
  SourcePos start_pos;
  std::map<std::string, DecisionNode> nodes;  // ordered by id

  bool operator==(const ProcedureGraph& o) const {
    return name == o.name && disease == o.disease && start == o.start && nodes == o.nodes;
  }
};

enum class Severity { error, warning };

enum class DiagnosticCode {
  lexical,
  syntax,
  duplicate_node,
  duplicate_start,
  missing_start,
  unknown_start,
  dangling_target,
  cycle,
  unreachable_node,
  terminal_unreachable,
  unresolved_name,
};

const char* to_string(DiagnosticCode code);

struct Diagnostic {
  Severity severity = Severity::error;
  DiagnosticCode code = DiagnosticCode::syntax;
  SourcePos pos;
  std::string message;

  // "file:line:col: error[code]: message"
  std::string format(std::string_view file = {}) const;
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);

class ProcedureParseError : public FormatError {
 public:
  explicit ProcedureParseError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

ProcedureGraph parse_procedure(std::string_view text);
ProcedureGraph load_procedure(const std::filesystem::path& path);
// Deterministic: start first, then nodes ordered by id.
std::string serialize(const ProcedureGraph& graph);
std::string serialize(const Predicate& predicate);

// Name sets to resolve atoms against. A missing set leaves that atom kind
// unchecked; strict turns unresolved names into errors instead of warnings.
struct Vocabulary {
  const Ontology* ontology = nullptr;
  std::optional<std::set<std::string>> findings;
  std::optional<std::set<std::string>> flags;
  bool strict = true;
};

std::vector<Diagnostic> validate(const ProcedureGraph& graph, const Vocabulary& vocabulary = {});

enum class Outcome { confirm, exclude, failure };

const char* to_string(Outcome o);
Outcome parse_outcome(std::string_view text);

struct TraceStep {
  std::string node;
  std::string question;  // as rendered by the channel
  bool truth = false;    // what the record says
  bool answer = false;   // what the doctor understood
};

struct RunTrace {
  std::vector<TraceStep> steps;
  Outcome outcome = Outcome::failure;

  std::size_t questions_asked() const { return steps.size(); }
};

inline constexpr std::size_t kMaxDifferentialQuestions = 20;

// Walks the graph from the start node. Each predicate is evaluated by the
// patient on the record, passed through the channel, and the understood
// answer picks the edge. Failure when max_questions pass without a terminal.
RunTrace run(const ProcedureGraph& graph, const PatientRecord& record, const Ontology& ontology,
             SemanticChannel& channel, std::size_t max_questions = kMaxDifferentialQuestions);

// Same walk with an arbitrary patient answering each node truthfully.
using NodeAnswerer = std::function<bool(const DecisionNode&)>;
RunTrace run(const ProcedureGraph& graph, const NodeAnswerer& patient, SemanticChannel& channel,
             std::size_t max_questions = kMaxDifferentialQuestions);

// Pure edge-following under a node -> answer assignment; no channel, no cap.
Terminal truth_table_outcome(const ProcedureGraph& graph,
                             const std::map<std::string, bool>& assignment);

// The answer every node's predicate takes on the record.
std::map<std::string, bool> induced_answers(const ProcedureGraph& graph,
                                            const PatientRecord& record, const Ontology& ontology);

// Longest start-to-terminal path, counted in questions.
std::size_t longest_path(const ProcedureGraph& graph);

struct LabeledCohortConfig {
  std::size_t size = 200;
  double positive_fraction = 0.5;
  double symptom_prob = 0.5;     // per first-layer category, and per child given its parent
  double finding_presence = 0.85;
  std::size_t history_dim = 0;
  std::uint64_t seed = 1;
};

// Records whose label is the procedure's own verdict on them under exact
// answers (1 = confirm). Findings and flags referenced by the procedure are
// drawn around the procedure's thresholds; disease names are
// {"not_<disease>", "<disease>"}.
Cohort generate_labeled_cohort(const ProcedureGraph& graph, const Ontology& ontology,
                               const LabeledCohortConfig& config);

}  // namespace ddx
