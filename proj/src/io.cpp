#include "tracelab/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

namespace tracelab {
namespace {

// Strict key whitelist: unknown fields are configuration errors.
void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const char* where) {
  if (!j.is_object())
    throw Error(Errc::bad_input, std::string(where) + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw Error(Errc::bad_input, std::string(where) + ": unknown field '" +
                                       item.key() + "'");
  }
}

const Json& need(const Json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end())
    throw Error(Errc::bad_input,
                std::string(where) + ": missing field '" + key + "'");
  return *it;
}

double need_number(const Json& j, const char* key, const char* where) {
  const Json& v = need(j, key, where);
  if (!v.is_number())
    throw Error(Errc::bad_input,
                std::string(where) + ": field '" + key + "' must be a number");
  return v.get<double>();
}

int need_int(const Json& j, const char* key, const char* where) {
  const Json& v = need(j, key, where);
  if (!v.is_number_integer())
    throw Error(Errc::bad_input, std::string(where) + ": field '" + key +
                                     "' must be an integer");
  return v.get<int>();
}

Cx complex_from_json(const Json& j, const char* where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(Errc::bad_input,
                std::string(where) + ": expected an [re, im] pair");
  return Cx(j[0].get<double>(), j[1].get<double>());
}

Json complex_to_json(Cx v) { return Json::array({v.real(), v.imag()}); }

}  // namespace

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::bad_input, "cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw Error(Errc::bad_input, "malformed JSON in '" + path + "': " +
                                     std::string(e.what()));
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::bad_input, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(Errc::bad_input, "short write to '" + path + "'");
}

std::string dump_report(const Json& report) { return report.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Core types
// ---------------------------------------------------------------------------

AlgebraPtr algebra_from_json(const Json& j) {
  check_keys(j, {"blocks"}, "algebra");
  const Json& bs = need(j, "blocks", "algebra");
  if (!bs.is_array() || bs.empty())
    throw Error(Errc::bad_input, "algebra: 'blocks' must be a nonempty array");
  std::vector<Block> blocks;
  for (const Json& b : bs) {
    check_keys(b, {"dim", "weight"}, "algebra block");
    Block blk;
    blk.dim = need_int(b, "dim", "algebra block");
    const Json& w = need(b, "weight", "algebra block");
    if (!w.is_string())
      throw Error(Errc::bad_input,
                  "algebra block: 'weight' must be a rational string");
    blk.weight = parse_rational(w.get<std::string>());
    blocks.push_back(blk);
  }
  return make_algebra(std::move(blocks));
}

Json algebra_to_json(const TracialAlgebra& alg) {
  Json bs = Json::array();
  for (int j = 0; j < alg.num_blocks(); ++j)
    bs.push_back(Json{{"dim", alg.block_dim(j)},
                      {"weight", format_rational(alg.weight(j))}});
  return Json{{"blocks", std::move(bs)}};
}

Inclusion inclusion_from_json(const Json& j) {
  check_keys(j, {"sub", "amb", "mult"}, "inclusion");
  AlgebraPtr sub = algebra_from_json(need(j, "sub", "inclusion"));
  AlgebraPtr amb = algebra_from_json(need(j, "amb", "inclusion"));
  const Json& mj = need(j, "mult", "inclusion");
  if (!mj.is_array())
    throw Error(Errc::bad_input, "inclusion: 'mult' must be a matrix");
  std::vector<std::vector<int>> mult;
  for (const Json& row : mj) {
    if (!row.is_array())
      throw Error(Errc::bad_input, "inclusion: 'mult' rows must be arrays");
    std::vector<int> r;
    for (const Json& v : row) {
      if (!v.is_number_integer())
        throw Error(Errc::bad_input, "inclusion: multiplicities are integers");
      r.push_back(v.get<int>());
    }
    mult.push_back(std::move(r));
  }
  return make_inclusion(std::move(sub), std::move(amb), std::move(mult));
}

Json inclusion_to_json(const Inclusion& inc) {
  Json mult = Json::array();
  for (const auto& row : inc.mult) mult.push_back(row);
  return Json{{"sub", algebra_to_json(*inc.sub)},
              {"amb", algebra_to_json(*inc.amb)},
              {"mult", std::move(mult)}};
}

Element element_from_json(const AlgebraPtr& alg, const Json& j) {
  if (!alg) throw Error(Errc::bad_input, "element: null algebra");
  if (!j.is_array() || static_cast<int>(j.size()) != alg.get()->num_blocks())
    throw Error(Errc::bad_input, "element: expected one matrix per block");
  std::vector<Mat> mats;
  for (int b = 0; b < alg->num_blocks(); ++b) {
    const int n = alg->block_dim(b);
    const Json& mj = j[b];
    if (!mj.is_array() || static_cast<int>(mj.size()) != n)
      throw Error(Errc::bad_input, "element: block " + std::to_string(b) +
                                       " must have " + std::to_string(n) +
                                       " rows");
    Mat m(n, n);
    for (int r = 0; r < n; ++r) {
      const Json& row = mj[r];
      if (!row.is_array() || static_cast<int>(row.size()) != n)
        throw Error(Errc::bad_input, "element: ragged row in block " +
                                         std::to_string(b));
      for (int c = 0; c < n; ++c)
        m(r, c) = complex_from_json(row[c], "element entry");
    }
    mats.push_back(std::move(m));
  }
  return Element(alg, std::move(mats));
}

Json element_to_json(const Element& x) {
  Json blocks = Json::array();
  for (int b = 0; b < x.num_blocks(); ++b) {
    const Mat& m = x.block(b);
    Json mat = Json::array();
    for (int r = 0; r < m.rows(); ++r) {
      Json row = Json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
      mat.push_back(std::move(row));
    }
    blocks.push_back(std::move(mat));
  }
  return blocks;
}

Tuple tuple_from_json(const AlgebraPtr& alg, const Json& j) {
  if (!j.is_array() || j.empty())
    throw Error(Errc::bad_input, "tuple: expected a nonempty array of elements");
  std::vector<Element> entries;
  for (const Json& e : j) entries.push_back(element_from_json(alg, e));
  return Tuple(std::move(entries));
}

Json tuple_to_json(const Tuple& x) {
  Json arr = Json::array();
  for (int k = 0; k < x.arity(); ++k) arr.push_back(element_to_json(x[k]));
  return arr;
}

BallSpec ball_from_json(const Json& j) {
  if (!j.is_array() || j.empty())
    throw Error(Errc::bad_input, "ball: expected a nonempty array of radii");
  BallSpec b;
  for (const Json& v : j) {
    if (!v.is_number() || !(v.get<double>() > 0.0))
      throw Error(Errc::bad_input, "ball: radii must be positive numbers");
    b.radii.push_back(v.get<double>());
  }
  return b;
}

Json ball_to_json(const BallSpec& ball) {
  return Json(ball.radii);
}

// ---------------------------------------------------------------------------
// Predicate grammar
// ---------------------------------------------------------------------------

namespace {

TracePoly poly_from_json(const AlgebraPtr& alg, int arity, const Json& j) {
  check_keys(j, {"monomials"}, "poly");
  const Json& ms = need(j, "monomials", "poly");
  if (!ms.is_array())
    throw Error(Errc::bad_input, "poly: 'monomials' must be an array");
  TracePoly p;
  p.algebra = alg;
  p.arity = arity;
  for (const Json& mj : ms) {
    check_keys(mj, {"coeff", "letters"}, "monomial");
    Monomial m;
    m.coeff = complex_from_json(need(mj, "coeff", "monomial"), "coeff");
    const Json& ls = need(mj, "letters", "monomial");
    if (!ls.is_array())
      throw Error(Errc::bad_input, "monomial: 'letters' must be an array");
    for (const Json& lj : ls) {
      const bool star = lj.contains("star")
                            ? need(lj, "star", "letter").get<bool>()
                            : false;
      if (lj.contains("var")) {
        check_keys(lj, {"var", "star"}, "letter");
        const int k = need_int(lj, "var", "letter");
        if (k < 0 || k >= arity)
          throw Error(Errc::bad_input, "letter: variable slot out of range");
        m.letters.push_back(Letter::variable(k, star));
      } else if (lj.contains("matrix")) {
        check_keys(lj, {"matrix", "star"}, "letter");
        m.letters.push_back(Letter::constant(
            element_from_json(alg, need(lj, "matrix", "letter")), star));
      } else {
        throw Error(Errc::bad_input, "letter: need 'var' or 'matrix'");
      }
    }
    p.monos.push_back(std::move(m));
  }
  return p;
}

Predicate expr_from_json(const AlgebraPtr& alg, int arity, const Json& j,
                         const InnerOptions& inner) {
  if (!j.is_object())
    throw Error(Errc::bad_input, "predicate: expected an object expression");
  const Json& opj = need(j, "op", "predicate");
  if (!opj.is_string())
    throw Error(Errc::bad_input, "predicate: 'op' must be a string");
  const std::string op = opj.get<std::string>();

  const auto binary_args = [&](const char* who) {
    const Json& as = need(j, "args", who);
    if (!as.is_array() || as.size() != 2)
      throw Error(Errc::bad_input,
                  std::string(who) + ": 'args' must hold two expressions");
    return std::pair<Predicate, Predicate>(
        expr_from_json(alg, arity, as[0], inner),
        expr_from_json(alg, arity, as[1], inner));
  };

  if (op == "trace_re" || op == "trace_im") {
    check_keys(j, {"op", "poly"}, "trace expression");
    TracePoly p = poly_from_json(alg, arity, need(j, "poly", "trace"));
    return op == "trace_re" ? Predicate::trace_re(std::move(p))
                            : Predicate::trace_im(std::move(p));
  }
  if (op == "const") {
    check_keys(j, {"op", "value"}, "const expression");
    return Predicate::constant(alg, arity, need_number(j, "value", "const"));
  }
  if (op == "inner_re") {
    check_keys(j, {"op", "tuple"}, "inner expression");
    Tuple a = tuple_from_json(alg, need(j, "tuple", "inner_re"));
    if (a.arity() != arity)
      throw Error(Errc::bad_input, "inner_re: tuple arity mismatch");
    return Predicate::inner_re(a);
  }
  if (op == "add" || op == "sub" || op == "mul" || op == "max" ||
      op == "min") {
    check_keys(j, {"op", "args"}, "binary expression");
    auto [a, b] = binary_args(op.c_str());
    if (op == "add") return a + b;
    if (op == "sub") return a - b;
    if (op == "mul") return Predicate::mul(a, b);
    if (op == "max") return Predicate::max(a, b);
    return Predicate::min(a, b);
  }
  if (op == "scale") {
    check_keys(j, {"op", "factor", "arg"}, "scale expression");
    return Predicate::scale(
        need_number(j, "factor", "scale"),
        expr_from_json(alg, arity, need(j, "arg", "scale"), inner));
  }
  if (op == "neg" || op == "abs") {
    check_keys(j, {"op", "arg"}, "unary expression");
    Predicate a = expr_from_json(alg, arity, need(j, "arg", op.c_str()), inner);
    return op == "neg" ? Predicate::neg(a) : Predicate::abs(a);
  }
  if (op == "sup" || op == "inf") {
    check_keys(j, {"op", "radii", "arg"}, "quantifier expression");
    const BallSpec ball = ball_from_json(need(j, "radii", op.c_str()));
    Predicate child = expr_from_json(alg, arity + ball.arity(),
                                     need(j, "arg", op.c_str()), inner);
    return op == "sup" ? Predicate::ball_sup(std::move(child), ball, inner)
                       : Predicate::ball_inf(std::move(child), ball, inner);
  }
  throw Error(Errc::bad_input, "predicate: unknown op '" + op + "'");
}

}  // namespace

Predicate predicate_from_json(const AlgebraPtr& alg, int arity, const Json& j,
                              const InnerOptions& inner) {
  if (!alg) throw Error(Errc::bad_input, "predicate: null algebra");
  if (arity < 0) throw Error(Errc::bad_input, "predicate: negative arity");
  return expr_from_json(alg, arity, j, inner);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  return "id,command,C,d,gap,dim_mid,dim_joint,err,pass";
}

std::string csv_line(const CsvRow& row) {
  const auto num = [](double v) {
    return std::isnan(v) ? std::string() : format_double(v);
  };
  const auto dim = [](int v) {
    return v < 0 ? std::string() : std::to_string(v);
  };
  std::ostringstream out;
  out << row.id << ',' << row.command << ',' << num(row.C) << ','
      << num(row.d) << ',' << num(row.gap) << ',' << dim(row.dim_mid) << ','
      << dim(row.dim_joint) << ',' << num(row.err) << ','
      << (row.pass ? "true" : "false");
  return out.str();
}

}  // namespace tracelab
