#include <algorithm>
#include <deque>
#include <set>

#include "ddx/procedure.hpp"

namespace ddx {

namespace {

const std::string* node_target(const Target& t) { return std::get_if<std::string>(&t); }

void add(std::vector<Diagnostic>& out, Severity severity, DiagnosticCode code, SourcePos pos,
         std::string message) {
  out.push_back(Diagnostic{severity, code, pos, std::move(message)});
}

// Edges restricted to targets that resolve.
std::map<std::string, std::vector<std::string>> resolved_edges(const ProcedureGraph& g) {
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto& [id, n] : g.nodes) {
    auto& out = edges[id];
    for (const Target* t : {&n.yes, &n.no}) {
      const auto* next = node_target(*t);
      if (next != nullptr && g.nodes.count(*next) != 0) out.push_back(*next);
    }
  }
  return edges;
}

void check_targets(const ProcedureGraph& g, std::vector<Diagnostic>& out) {
  if (g.nodes.count(g.start) == 0) {
    add(out, Severity::error, DiagnosticCode::unknown_start, g.start_pos,
        "start node '" + g.start + "' is not defined");
  }
  for (const auto& [id, n] : g.nodes) {
    const std::pair<const Target*, SourcePos> edges[] = {{&n.yes, n.yes_pos}, {&n.no, n.no_pos}};
    for (std::size_t e = 0; e < 2; ++e) {
      const auto* next = node_target(*edges[e].first);
      if (next != nullptr && g.nodes.count(*next) == 0) {
        add(out, Severity::error, DiagnosticCode::dangling_target, edges[e].second,
            "node '" + id + "': " + (e == 0 ? "yes" : "no") + "-edge targets undefined node '" +
                *next + "'");
      }
    }
  }
}

void check_cycles(const ProcedureGraph& g,
                  const std::map<std::string, std::vector<std::string>>& edges,
                  std::vector<Diagnostic>& out) {
  // Kahn's algorithm; whatever cannot be ordered sits on or behind a cycle.
  std::map<std::string, std::size_t> indegree;
  for (const auto& [id, _] : g.nodes) indegree[id] = 0;
  for (const auto& [_, targets] : edges) {
    for (const auto& t : targets) ++indegree[t];
  }
  std::deque<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t ordered = 0;
  while (!ready.empty()) {
    const std::string id = ready.front();
    ready.pop_front();
    ++ordered;
    for (const auto& t : edges.at(id)) {
      if (--indegree[t] == 0) ready.push_back(t);
    }
  }
  if (ordered == g.nodes.size()) return;

  // Name each cycle through a depth-first walk over the leftover nodes.
  enum Color { white, grey, black };
  std::map<std::string, Color> color;
  std::vector<std::string> stack;
  std::set<std::string> reported;
  auto visit = [&](auto&& self, const std::string& id) -> void {
    color[id] = grey;
    stack.push_back(id);
    for (const auto& t : edges.at(id)) {
      if (color[t] == grey) {
        auto from = std::find(stack.begin(), stack.end(), t);
        bool fresh = false;
        std::string path;
        for (auto it = from; it != stack.end(); ++it) {
          fresh = reported.insert(*it).second || fresh;
          path += *it + " -> ";
        }
        path += t;
        if (fresh) {
          add(out, Severity::error, DiagnosticCode::cycle, g.nodes.at(t).pos,
              "cycle " + path);
        }
      } else if (color[t] == white) {
        self(self, t);
      }
    }
    stack.pop_back();
    color[id] = black;
  };
  for (const auto& [id, d] : indegree) {
    if (d > 0 && color[id] == white) visit(visit, id);
  }
}

void check_reachability(const ProcedureGraph& g,
                        const std::map<std::string, std::vector<std::string>>& edges,
                        std::vector<Diagnostic>& out) {
  if (g.nodes.count(g.start) == 0) return;
  std::set<std::string> seen{g.start};
  std::deque<std::string> frontier{g.start};
  bool confirm = false;
  bool exclude = false;
  while (!frontier.empty()) {
    const std::string id = frontier.front();
    frontier.pop_front();
    const auto& n = g.nodes.at(id);
    for (const Target* t : {&n.yes, &n.no}) {
      if (const auto* term = std::get_if<Terminal>(t)) {
        (*term == Terminal::confirm ? confirm : exclude) = true;
      }
    }
    for (const auto& t : edges.at(id)) {
      if (seen.insert(t).second) frontier.push_back(t);
    }
  }
  for (const auto& [id, n] : g.nodes) {
    if (seen.count(id) == 0) {
      add(out, Severity::error, DiagnosticCode::unreachable_node, n.pos,
          "node '" + id + "' is unreachable from start node '" + g.start + "'");
    }
  }
  if (!confirm) {
    add(out, Severity::warning, DiagnosticCode::terminal_unreachable, g.start_pos,
        "no path reaches 'confirm'");
  }
  if (!exclude) {
    add(out, Severity::warning, DiagnosticCode::terminal_unreachable, g.start_pos,
        "no path reaches 'exclude'");
  }
}

void check_names(const ProcedureGraph& g, const Vocabulary& v, std::vector<Diagnostic>& out) {
  const Severity severity = v.strict ? Severity::error : Severity::warning;
  for (const auto& [id, n] : g.nodes) {
    for_each_atom(n.when, [&](const Atom& a) {
      bool known = true;
      const char* kind = "symptom";
      switch (a.kind) {
        case Atom::Kind::symptom:
          known = v.ontology == nullptr || v.ontology->find(a.name).has_value();
          break;
        case Atom::Kind::finding:
          kind = "finding";
          known = !v.findings || v.findings->count(a.name) != 0;
          break;
        case Atom::Kind::flag:
          kind = "flag";
          known = !v.flags || v.flags->count(a.name) != 0;
          break;
      }
      if (!known) {
        add(out, severity, DiagnosticCode::unresolved_name, a.pos,
            "node '" + id + "': unknown " + kind + " '" + a.name + "'");
      }
    });
  }
}

}  // namespace

std::vector<Diagnostic> validate(const ProcedureGraph& g, const Vocabulary& vocabulary) {
  std::vector<Diagnostic> out;
  check_targets(g, out);
  const auto edges = resolved_edges(g);
  check_cycles(g, edges, out);
  check_reachability(g, edges, out);
  check_names(g, vocabulary, out);
  return out;
}

}  // namespace ddx
