// JSON serialization of algebras, inclusions, elements, tuples, balls and
// predicates, plus the frozen CSV summary format shared by all commands.
//
// Parsing is strict: every object is checked against its whitelist of keys
// and any unknown field raises Error(bad_input), so configuration typos
// cannot silently change an experiment.  Serialization is deterministic
// (sorted keys, shortest round-trip numbers), which is what makes report
// files byte-identical across reruns with the same seed.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tracelab/algebra.hpp"
#include "tracelab/predicate.hpp"

namespace tracelab {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

Json load_json_file(const std::string& path);           // Error(bad_input)
void write_text_file(const std::string& path, const std::string& text);

// Serialized with sorted keys, two-space indent and a trailing newline.
std::string dump_report(const Json& report);

// ---------------------------------------------------------------------------
// Core types <-> JSON
// ---------------------------------------------------------------------------
// Algebra:    {"blocks": [{"dim": 2, "weight": "1/2"}, ...]}
// Inclusion:  {"sub": ALGEBRA, "amb": ALGEBRA, "mult": [[...], ...]}
// Element:    one [n x n] array of [re, im] pairs per block
// Tuple:      array of elements
// Ball:       array of positive radii

AlgebraPtr algebra_from_json(const Json& j);
Json algebra_to_json(const TracialAlgebra& alg);

Inclusion inclusion_from_json(const Json& j);
Json inclusion_to_json(const Inclusion& inc);

Element element_from_json(const AlgebraPtr& alg, const Json& j);
Json element_to_json(const Element& x);

Tuple tuple_from_json(const AlgebraPtr& alg, const Json& j);
Json tuple_to_json(const Tuple& x);

BallSpec ball_from_json(const Json& j);
Json ball_to_json(const BallSpec& ball);

// ---------------------------------------------------------------------------
// Predicate expression grammar
// ---------------------------------------------------------------------------
// An expression is an object with an "op" field:
//   {"op": "trace_re" | "trace_im", "poly": POLY}
//   {"op": "const", "value": 1.5}
//   {"op": "inner_re", "tuple": TUPLE}
//   {"op": "add" | "sub" | "mul" | "max" | "min", "args": [E, E]}
//   {"op": "scale", "factor": -2.0, "arg": E}
//   {"op": "neg" | "abs", "arg": E}
//   {"op": "sup" | "inf", "radii": [r...], "arg": E}
// Quantifiers bind the trailing radii.size() slots of their argument, so the
// argument is parsed with arity + radii.size() free slots.  POLY is
//   {"monomials": [{"coeff": [re, im], "letters": [LETTER...]}, ...]}
// and a LETTER is {"var": k, "star": false} or {"matrix": ELEMENT,
// "star": false}.  An empty letter list denotes tau(1) = 1.

Predicate predicate_from_json(const AlgebraPtr& alg, int arity, const Json& j,
                              const InnerOptions& inner = {});

// ---------------------------------------------------------------------------
// CSV summaries (frozen columns)
// ---------------------------------------------------------------------------
// Every command appends rows with the same nine columns; fields that do not
// apply to a command are left empty.

std::string csv_header();  // "id,command,C,d,gap,dim_mid,dim_joint,err,pass"

struct CsvRow {
  std::string id;
  std::string command;
  // quiet NaN marks "not applicable"; rendered as an empty cell
  double C = std::numeric_limits<double>::quiet_NaN();
  double d = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  int dim_mid = -1;   // -1 marks "not applicable"
  int dim_joint = -1;
  double err = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

std::string csv_line(const CsvRow& row);

// Shortest round-trip decimal form of a double (deterministic).
std::string format_double(double v);

}  // namespace tracelab
