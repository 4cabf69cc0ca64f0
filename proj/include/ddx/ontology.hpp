#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddx/types.hpp"

namespace ddx {

enum class Layer : std::uint8_t { first = 1, second = 2 };

struct SymptomNode {
  SymptomId id;
  std::string name;
  Layer layer = Layer::first;
  std::optional<SymptomId> parent;  // set iff layer == second
  std::vector<SymptomId> children;  // non-empty only for first-layer nodes

  bool operator==(const SymptomNode&) const = default;
};

// One line of an ontology file before index assignment.
struct OntologyEntry {
  int layer = 1;
  std::string name;
  std::string parent;  // empty for first-layer entries
  int line = 0;        // 1-based source line, 0 when built in code
};

// Two-layer symptom hierarchy. Immutable once constructed; the constructor
// assigns indices first-layer-first (in entry order) and validates links.
class Ontology {
 public:
  Ontology() = default;
  explicit Ontology(std::span<const OntologyEntry> entries);

  std::size_t size() const { return nodes_.size(); }
  std::size_t first_layer_count() const { return first_count_; }

  const std::vector<SymptomNode>& nodes() const { return nodes_; }
  const SymptomNode& node(SymptomId id) const;

  bool is_first_layer(SymptomId id) const { return check(id).value < first_count_; }
  std::optional<SymptomId> parent_of(SymptomId id) const { return node(id).parent; }
  std::span<const SymptomId> children_of(SymptomId id) const { return node(id).children; }
  std::optional<SymptomId> find(std::string_view name) const;

  bool operator==(const Ontology& other) const { return nodes_ == other.nodes_; }

 private:
  SymptomId check(SymptomId id) const;

  std::vector<SymptomNode> nodes_;
  std::size_t first_count_ = 0;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Tab-separated `layer<TAB>name<TAB>parent_or_dash`, `#` comments.
Ontology parse_ontology(std::string_view text);
Ontology load_ontology(const std::filesystem::path& path);
std::string serialize_ontology(const Ontology& ontology);
void save_ontology(const Ontology& ontology, const std::filesystem::path& path);

// Uniform hierarchy named "cat<i>" / "sym<i>.<j>". The layout is fully
// determined by the counts; the seed is accepted for pipeline uniformity.
Ontology generate_synthetic_ontology(std::size_t n_first, std::size_t children_per_first,
                                     std::uint64_t seed);

}  // namespace ddx
