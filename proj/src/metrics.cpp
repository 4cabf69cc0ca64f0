#include "ddx/metrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {

using Json = nlohmann::ordered_json;

DifferentialMetrics differential_metrics(std::span<const Outcome> outcomes,
                                         std::span<const bool> has_disease) {
  if (outcomes.empty()) throw ContractViolation("differential metrics need at least one case");
  if (outcomes.size() != has_disease.size()) {
    throw ShapeError("outcomes and labels differ in length");
  }
  DifferentialMetrics m;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i] == Outcome::failure) ++m.failures;
    const bool predicted = outcomes[i] == Outcome::confirm;
    if (predicted && has_disease[i]) ++m.tp;
    else if (predicted) ++m.fp;
    else if (has_disease[i]) ++m.fn;
    else ++m.tn;
  }
  const double n = static_cast<double>(outcomes.size());
  m.success_rate = (n - static_cast<double>(m.failures)) / n;
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

const char* to_string(ErrorKind k) {
  return k == ErrorKind::false_negative ? "false-negative" : "false-positive";
}

Outcome transcript_outcome(const Transcript& t) {
  for (auto it = t.turns.rbegin(); it != t.turns.rend(); ++it) {
    if (it->kind == TurnKind::diagnosis) return parse_outcome(it->value);
  }
  throw FormatError("transcript " + t.consultation_id + " has no diagnosis turn");
}

ErrorReport build_error_report(std::span<const Transcript> transcripts,
                               std::span<const bool> has_disease) {
  if (transcripts.size() != has_disease.size()) {
    throw ShapeError("transcripts and labels differ in length");
  }
  ErrorReport report;
  std::map<std::tuple<ErrorKind, std::string, std::string>, std::size_t> groups;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const Transcript& t = transcripts[i];
    const Outcome outcome = transcript_outcome(t);
    const bool predicted = outcome == Outcome::confirm;
    if (predicted == has_disease[i]) continue;
    ErrorCase c;
    c.record_id = t.record_id;
    c.kind = predicted ? ErrorKind::false_positive : ErrorKind::false_negative;
    c.outcome = outcome;
    for (const auto& turn : t.turns) {
      if (turn.kind == TurnKind::answer && turn.phase == Phase::differential) {
        c.path.emplace_back(turn.ref, turn.value == "yes");
      }
    }
    std::set<std::string> visited;
    for (const auto& [node, _] : c.path) visited.insert(node);
    for (const auto& node : visited) ++report.node_counts[node];
    std::string last_node;
    std::string edge;
    if (!c.path.empty()) {
      last_node = c.path.back().first;
      edge = c.path.back().second ? "yes" : "no";
    }
    ++groups[{c.kind, last_node, edge}];
    ++(c.kind == ErrorKind::false_negative ? report.false_negatives : report.false_positives);
    report.cases.push_back(std::move(c));
  }
  for (const auto& [key, count] : groups) {
    report.groups.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
  }
  std::stable_sort(report.groups.begin(), report.groups.end(),
                   [](const ErrorGroup& a, const ErrorGroup& b) { return a.count > b.count; });
  return report;
}

std::string render(const ErrorReport& r) {
  std::ostringstream out;
  out << "errors: " << r.total() << " (false negatives " << r.false_negatives
      << ", false positives " << r.false_positives << ")\n";
  if (r.total() == 0) return out.str();
  out << "\nby exit edge:\n";
  for (const auto& g : r.groups) {
    out << "  " << g.count << "  " << to_string(g.kind) << "  "
        << (g.last_node.empty() ? "(no question)" : g.last_node + " --" + g.edge + "-->") << '\n';
  }
  out << "\nby node on the path:\n";
  std::vector<std::pair<std::string, std::size_t>> nodes(r.node_counts.begin(),
                                                         r.node_counts.end());
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [node, count] : nodes) out << "  " << count << "  " << node << '\n';
  out << "\ncases:\n";
  for (const auto& c : r.cases) {
    out << "  " << c.record_id << "  " << to_string(c.kind) << "  " << to_string(c.outcome)
        << "  ";
    for (std::size_t i = 0; i < c.path.size(); ++i) {
      out << (i ? " " : "") << c.path[i].first << '=' << (c.path[i].second ? "yes" : "no");
    }
    out << '\n';
  }
  return out.str();
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json("NA"); }

}  // namespace

std::string to_json_line(const DifferentialMetrics& m, const std::string& label) {
  Json j;
  j["kind"] = "differential";
  j["label"] = label;
  j["cases"] = m.total();
  j["success_rate"] = m.success_rate;
  j["accuracy"] = m.accuracy;
  j["precision"] = optional_number(m.precision);
  j["recall"] = optional_number(m.recall);
  j["f1"] = optional_number(m.f1);
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["failures"] = m.failures;
  return j.dump();
}

std::string to_json_line(const ScreeningMetrics& m, const std::string& label) {
  Json j;
  j["kind"] = "screening";
  j["label"] = label;
  j["cases"] = m.cases;
  j["top1"] = m.top1;
  j["top3"] = m.top3;
  j["top5"] = m.top5;
  j["mean_questions"] = m.mean_questions;
  return j.dump();
}

std::string render_metrics_table(std::string_view jsonl) {
  std::ostringstream out;
  bool first = true;
  std::size_t line_no = 0;
  for (auto line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw FormatError("metrics line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError("metrics line " + std::to_string(line_no) + " is not an object");
    std::size_t width = 0;
    for (const auto& [key, _] : j.items()) width = std::max(width, key.size());
    if (!first) out << '\n';
    first = false;
    for (const auto& [key, value] : j.items()) {
      std::string text;
      if (value.is_string()) text = value.get<std::string>();
      else if (value.is_number_float()) text = format_double(value.get<double>());
      else text = value.dump();
      out << key << std::string(width - key.size() + 2, ' ') << text << '\n';
    }
  }
  return out.str();
}

}  // namespace ddx
