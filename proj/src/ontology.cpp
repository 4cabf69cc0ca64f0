#include "ddx/ontology.hpp"

#include <fstream>
#include <sstream>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {
namespace {

std::string where(const OntologyEntry& e) {
  return e.line > 0 ? "line " + std::to_string(e.line) + ": " : "";
}

}  // namespace

Ontology::Ontology(std::span<const OntologyEntry> entries) {
  std::unordered_map<std::string, const OntologyEntry*> seen;
  std::vector<const OntologyEntry*> first, second;
  for (const auto& e : entries) {
    if (e.name.empty()) throw ValidationError(where(e) + "empty symptom name");
    if (!seen.emplace(e.name, &e).second) {
      throw ValidationError(where(e) + "duplicate symptom name '" + e.name + "'");
    }
    if (e.layer == 1) {
      if (!e.parent.empty()) {
        throw ValidationError(where(e) + "first-layer symptom '" + e.name + "' has a parent");
      }
      first.push_back(&e);
    } else if (e.layer == 2) {
      auto it = seen.find(e.parent);
      if (e.parent.empty() || it == seen.end()) {
        throw ValidationError(where(e) + "symptom '" + e.name + "' names missing parent '" +
                              e.parent + "'");
      }
      if (it->second->layer != 1) {
        throw ValidationError(where(e) + "parent '" + e.parent + "' of '" + e.name +
                              "' is a second-layer symptom");
      }
      second.push_back(&e);
    } else {
      throw ValidationError(where(e) + "layer must be 1 or 2, got " + std::to_string(e.layer));
    }
  }

  first_count_ = first.size();
  nodes_.reserve(entries.size());
  for (const auto* e : first) {
    SymptomNode n;
    n.id = SymptomId{nodes_.size()};
    n.name = e->name;
    n.layer = Layer::first;
    by_name_.emplace(n.name, nodes_.size());
    nodes_.push_back(std::move(n));
  }
  for (const auto* e : second) {
    SymptomNode n;
    n.id = SymptomId{nodes_.size()};
    n.name = e->name;
    n.layer = Layer::second;
    const std::size_t parent = by_name_.at(e->parent);
    n.parent = SymptomId{parent};
    nodes_[parent].children.push_back(n.id);
    by_name_.emplace(n.name, nodes_.size());
    nodes_.push_back(std::move(n));
  }
}

SymptomId Ontology::check(SymptomId id) const {
  if (id.value >= nodes_.size()) {
    throw ContractViolation("symptom id " + std::to_string(id.value) + " out of range [0, " +
                            std::to_string(nodes_.size()) + ")");
  }
  return id;
}

const SymptomNode& Ontology::node(SymptomId id) const { return nodes_[check(id).value]; }

std::optional<SymptomId> Ontology::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return SymptomId{it->second};
}

Ontology parse_ontology(std::string_view text) {
  std::vector<OntologyEntry> entries;
  int line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    OntologyEntry e;
    e.line = line_no;
    auto layer = trim(fields[0]);
    if (layer == "1") {
      e.layer = 1;
    } else if (layer == "2") {
      e.layer = 2;
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": layer must be 1 or 2, got '" +
                        std::string(layer) + "'");
    }
    e.name = std::string(trim(fields[1]));
    auto parent = trim(fields[2]);
    if (parent != "-") e.parent = std::string(parent);
    entries.push_back(std::move(e));
  }
  return Ontology(entries);
}

Ontology load_ontology(const std::filesystem::path& path) {
  return parse_ontology(read_file(path));
}

std::string serialize_ontology(const Ontology& ontology) {
  std::ostringstream out;
  out << "# layer\tname\tparent\n";
  // Each category followed by its children keeps the file readable and
  // satisfies the parent-before-child rule.
  for (std::size_t i = 0; i < ontology.first_layer_count(); ++i) {
    const auto& cat = ontology.node(SymptomId{i});
    out << "1\t" << cat.name << "\t-\n";
    for (auto child : cat.children) {
      out << "2\t" << ontology.node(child).name << '\t' << cat.name << '\n';
    }
  }
  return out.str();
}

void save_ontology(const Ontology& ontology, const std::filesystem::path& path) {
  write_file(path, serialize_ontology(ontology));
}

Ontology generate_synthetic_ontology(std::size_t n_first, std::size_t children_per_first,
                                     std::uint64_t /*seed*/) {
  if (n_first < 1) throw ContractViolation("n_first must be at least 1");
  std::vector<OntologyEntry> entries;
  entries.reserve(n_first * (1 + children_per_first));
  for (std::size_t i = 0; i < n_first; ++i) {
    entries.push_back({1, "cat" + std::to_string(i), "", 0});
  }
  for (std::size_t i = 0; i < n_first; ++i) {
    for (std::size_t j = 0; j < children_per_first; ++j) {
      entries.push_back(
          {2, "sym" + std::to_string(i) + "." + std::to_string(j), "cat" + std::to_string(i), 0});
    }
  }
  return Ontology(entries);
}

}  // namespace ddx
