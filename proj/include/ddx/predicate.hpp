#pragma once

#include <string>
#include <vector>

namespace ddx {

class Ontology;
struct PatientRecord;

// 1-based line:column in procedure source. Zero when built in code.
struct SourcePos {
  int line = 0;
  int column = 0;
};

enum class Comparison { ge, le, gt, lt, eq, ne };

const char* to_string(Comparison cmp);
bool compare(double lhs, Comparison cmp, double rhs);

// A single yes/no question the patient can answer from the record.
struct Atom {
  enum class Kind { symptom, finding, flag };

  Kind kind = Kind::symptom;
  std::string name;
  Comparison cmp = Comparison::ge;  // finding atoms only
  double constant = 0.0;            // finding atoms only
  bool missing_answer = false;      // answer when the record lacks the value
  SourcePos pos;

  bool operator==(const Atom& o) const {
    return kind == o.kind && name == o.name && missing_answer == o.missing_answer &&
           (kind != Kind::finding || (cmp == o.cmp && constant == o.constant));
  }
};

// Boolean expression over atoms.
struct Predicate {
  enum class Op { atom, all_of, any_of, negate };

  Op op = Op::atom;
  Atom atom;                      // op == atom
  std::vector<Predicate> operands;  // all_of / any_of: >= 2, negate: 1

  static Predicate leaf(Atom a) {
    Predicate p;
    p.atom = std::move(a);
    return p;
  }
  static Predicate negation(Predicate inner) {
    Predicate p;
    p.op = Op::negate;
    p.operands.push_back(std::move(inner));
    return p;
  }
  static Predicate combine(Op op, std::vector<Predicate> operands) {
    Predicate p;
    p.op = op;
    p.operands = std::move(operands);
    return p;
  }

  bool operator==(const Predicate& o) const {
    return op == o.op && (op != Op::atom || atom == o.atom) && operands == o.operands;
  }
};

// Patient-side evaluation against the record. Symptom atoms read the oracle
// bit; finding and flag atoms fall back to the atom's missing answer when the
// record has no value (default-normal rule). A flag is true iff its value is
// nonzero. Unknown symptom names throw ContractViolation.
bool evaluate(const Atom& atom, const PatientRecord& record, const Ontology& ontology);
bool evaluate(const Predicate& predicate, const PatientRecord& record, const Ontology& ontology);

template <class F>
void for_each_atom(const Predicate& p, F&& f) {
  if (p.op == Predicate::Op::atom) {
    f(p.atom);
    return;
  }
  for (const auto& q : p.operands) for_each_atom(q, f);
}

}  // namespace ddx
