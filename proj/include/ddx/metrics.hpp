#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddx/dialogue.hpp"
#include "ddx/procedure.hpp"

namespace ddx {

// Confusion-table metrics for one procedure. Failures count as negative
// predictions; precision, recall and F1 are absent when undefined.
struct DifferentialMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t failures = 0;
  double success_rate = 0.0;  // share of runs that reached a terminal
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;

  std::size_t total() const { return tp + fp + tn + fn; }
};

DifferentialMetrics differential_metrics(std::span<const Outcome> outcomes,
                                         std::span<const bool> has_disease);

enum class ErrorKind { false_negative, false_positive };

const char* to_string(ErrorKind k);

struct ErrorCase {
  std::string record_id;
  ErrorKind kind = ErrorKind::false_negative;
  Outcome outcome = Outcome::failure;
  std::vector<std::pair<std::string, bool>> path;  // (node, understood answer)
};

struct ErrorGroup {
  ErrorKind kind = ErrorKind::false_negative;
  std::string last_node;  // empty when no question was asked
  std::string edge;       // "yes" / "no" of the last answer
  std::size_t count = 0;
};

struct ErrorReport {
  std::vector<ErrorCase> cases;
  std::vector<ErrorGroup> groups;  // most frequent first
  std::map<std::string, std::size_t> node_counts;  // errors whose path visits the node
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;

  std::size_t total() const { return cases.size(); }
};

// Misdiagnosed cases from differential transcripts, grouped by how they left
// the procedure: (error kind, last node, last edge).
ErrorReport build_error_report(std::span<const Transcript> transcripts,
                               std::span<const bool> has_disease);

std::string render(const ErrorReport& report);

// Outcome recorded in a differential transcript's diagnosis turn.
Outcome transcript_outcome(const Transcript& transcript);

std::string to_json_line(const DifferentialMetrics& m, const std::string& label);

struct ScreeningMetrics {
  std::size_t cases = 0;
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
  double mean_questions = 0.0;
};

std::string to_json_line(const ScreeningMetrics& m, const std::string& label);

// Renders each line of a line-delimited metrics file as a two-column table.
std::string render_metrics_table(std::string_view jsonl);

}  // namespace ddx
