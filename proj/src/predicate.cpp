#include "ddx/predicate.hpp"

#include "ddx/cohort.hpp"
#include "ddx/error.hpp"
#include "ddx/ontology.hpp"

namespace ddx {

const char* to_string(Comparison cmp) {
  switch (cmp) {
    case Comparison::ge:
      return ">=";
    case Comparison::le:
      return "<=";
    case Comparison::gt:
      return ">";
    case Comparison::lt:
      return "<";
    case Comparison::eq:
      return "==";
    case Comparison::ne:
      return "!=";
  }
  return "?";
}

bool compare(double lhs, Comparison cmp, double rhs) {
  switch (cmp) {
    case Comparison::ge:
      return lhs >= rhs;
    case Comparison::le:
      return lhs <= rhs;
    case Comparison::gt:
      return lhs > rhs;
    case Comparison::lt:
      return lhs < rhs;
    case Comparison::eq:
      return lhs == rhs;
    case Comparison::ne:
      return lhs != rhs;
  }
  return false;
}

bool evaluate(const Atom& atom, const PatientRecord& record, const Ontology& ontology) {
  switch (atom.kind) {
    case Atom::Kind::symptom: {
      auto id = ontology.find(atom.name);
      if (!id) throw ContractViolation("unknown symptom '" + atom.name + "'");
      return answer_symptom_query(record, *id) == SymptomState::confirmed;
    }
    case Atom::Kind::finding:
    case Atom::Kind::flag:
      return answer_finding_query(record, atom);
  }
  return false;
}

bool evaluate(const Predicate& p, const PatientRecord& record, const Ontology& ontology) {
  switch (p.op) {
    case Predicate::Op::atom:
      return evaluate(p.atom, record, ontology);
    case Predicate::Op::all_of:
      for (const auto& q : p.operands) {
        if (!evaluate(q, record, ontology)) return false;
      }
      return true;
    case Predicate::Op::any_of:
      for (const auto& q : p.operands) {
        if (evaluate(q, record, ontology)) return true;
      }
      return false;
    case Predicate::Op::negate:
      return !evaluate(p.operands.at(0), record, ontology);
  }
  return false;
}

}  // namespace ddx
