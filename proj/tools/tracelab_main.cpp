// Batch experiment harness: parses JSON instance files, dispatches to the
// library modules, and emits deterministic JSON reports plus CSV summaries.
//
// Exit codes: 0 when every instance passes, 1 on input errors (malformed
// JSON, schema violations, bad flags), 2 on numerical flags (failed checks,
// non-convergence, invariant violations, exhausted budgets).  Reports embed
// the resolved configuration, seed and tool version; wall time goes to
// stderr so that reruns with the same seed produce byte-identical files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracelab/closure.hpp"
#include "tracelab/convex.hpp"
#include "tracelab/duality.hpp"
#include "tracelab/io.hpp"
#include "tracelab/transport.hpp"

using namespace tracelab;

namespace {

// Pinned acceptance tolerances for the duality gap report.
constexpr double kGapLower = -1e-6;
constexpr double kGapUpper = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kSpanTol = 1e-8;

struct CliConfig {
  std::string command;
  std::string instance;
  std::uint64_t seed = 0;
  int restarts = 20;
  double tol = 1e-9;
  std::string out_dir;
  std::string suite = "all";
  // regularize-specific
  double t = 0.1;
  double r = 1.0;
  double R = 2.0;
  double eps = 1e-8;
};

struct RunOutput {
  Json results = Json::array();
  std::vector<CsvRow> rows;
  bool all_pass = true;
  bool any_flag = false;  // numerical flags beyond plain pass/fail
};

void ensure_keys(const Json& j, std::initializer_list<const char*> allowed,
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

double opt_number(const Json& j, const char* key, double fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number())
    throw Error(Errc::bad_input,
                std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

// An instance file is either a single instance object or
// {"instances": [obj, ...]}.
std::vector<Json> split_instances(const Json& doc) {
  if (doc.is_object() && doc.contains("instances")) {
    ensure_keys(doc, {"instances"}, "instance file");
    const Json& arr = doc.at("instances");
    if (!arr.is_array() || arr.empty())
      throw Error(Errc::bad_input, "'instances' must be a nonempty array");
    return std::vector<Json>(arr.begin(), arr.end());
  }
  return {doc};
}

std::string instance_id(const Json& j, int idx) {
  if (j.is_object() && j.contains("id")) {
    const Json& v = j.at("id");
    if (!v.is_string())
      throw Error(Errc::bad_input, "'id' must be a string");
    return v.get<std::string>();
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "i%03d", idx);
  return buf;
}

Json config_json(const CliConfig& cfg) {
  Json c{{"command", cfg.command}, {"instance", cfg.instance},
         {"seed", cfg.seed},       {"restarts", cfg.restarts},
         {"tol", cfg.tol},         {"out_dir", cfg.out_dir}};
  if (cfg.command == "checks") c["suite"] = cfg.suite;
  if (cfg.command == "regularize") {
    c["t"] = cfg.t;
    c["r"] = cfg.r;
    c["R"] = cfg.R;
    c["eps"] = cfg.eps;
  }
  return c;
}

void write_outputs(const CliConfig& cfg, const RunOutput& run) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  Json report{{"version", kToolVersion},
              {"command", cfg.command},
              {"config", config_json(cfg)},
              {"results", run.results},
              {"pass", run.all_pass}};
  const std::string base = cfg.out_dir + "/" + cfg.command;
  write_text_file(base + "_report.json", dump_report(report));
  std::string csv = csv_header() + "\n";
  for (const CsvRow& row : run.rows) csv += csv_line(row) + "\n";
  write_text_file(base + "_summary.csv", csv);
  std::cout << "report: " << base << "_report.json\n";
}

int exit_code(const RunOutput& run) {
  return run.all_pass && !run.any_flag ? 0 : 2;
}

// ---------------------------------------------------------------------------
// dcl
// ---------------------------------------------------------------------------

Json dcl_result(const Inclusion& inc, std::uint64_t seed, bool* agreement) {
  const ClosureResult dcl = dcl_finite(inc);
  const Subalgebra acl = acl_finite(inc.amb);
  FixedPointOptions fp;
  fp.seed = seed;
  const std::vector<Element> oracle = automorphism_fixed_oracle(inc, fp);
  const double fwd = span_containment_gap(dcl.algebra.onb, oracle);
  const double bwd = span_containment_gap(oracle, dcl.algebra.onb);
  *agreement = dcl.dim == static_cast<int>(oracle.size()) && fwd <= kSpanTol &&
               bwd <= kSpanTol;
  return Json{{"dcl_dim", dcl.dim},
              {"acl_dim", acl.dim()},
              {"classes", dcl.partition.num_classes()},
              {"oracle_dim", static_cast<int>(oracle.size())},
              {"agreement", *agreement}};
}

RunOutput run_dcl(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "sub", "amb", "mult"}, "dcl instance");
    const Inclusion inc = inclusion_from_json(
        Json{{"sub", need(inst, "sub", "dcl instance")},
             {"amb", need(inst, "amb", "dcl instance")},
             {"mult", need(inst, "mult", "dcl instance")}});
    bool agreement = false;
    Json res = dcl_result(inc, cfg.seed, &agreement);
    res["id"] = instance_id(inst, idx);
    CsvRow row;
    row.id = res["id"].get<std::string>();
    row.command = "dcl";
    row.pass = agreement;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && agreement;
    run.results.push_back(std::move(res));
    std::cout << "dcl " << row.id << ": " << (agreement ? "pass" : "FAIL")
              << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// transport
// ---------------------------------------------------------------------------

RunOutput run_transport(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "algebra", "x", "y"}, "transport instance");
    const AlgebraPtr alg =
        algebra_from_json(need(inst, "algebra", "transport"));
    const OrbitType X =
        make_orbit_type(tuple_from_json(alg, need(inst, "x", "transport")));
    const OrbitType Y =
        make_orbit_type(tuple_from_json(alg, need(inst, "y", "transport")));
    CostOptions co;
    co.restarts = cfg.restarts;
    co.grad_tol = cfg.tol;
    co.seed = cfg.seed;
    const WassersteinResult w = wasserstein(X, Y, co);
    const std::string id = instance_id(inst, idx);
    run.results.push_back(Json{{"id", id},
                               {"C", w.cost.value},
                               {"d", w.d},
                               {"raw_d2", w.d2_raw},
                               {"converged", w.cost.converged},
                               {"aligner", element_to_json(w.cost.aligner)}});
    CsvRow row;
    row.id = id;
    row.command = "transport";
    row.C = w.cost.value;
    row.d = w.d;
    row.pass = w.cost.converged;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && w.cost.converged;
    std::cout << "transport " << id << ": C=" << format_double(w.cost.value)
              << " d=" << format_double(w.d)
              << (w.cost.converged ? "" : " (not converged)") << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

RunOutput run_duality(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "algebra", "x", "y", "radii"},
                "duality instance");
    const AlgebraPtr alg = algebra_from_json(need(inst, "algebra", "duality"));
    const OrbitType X =
        make_orbit_type(tuple_from_json(alg, need(inst, "x", "duality")));
    const OrbitType Y =
        make_orbit_type(tuple_from_json(alg, need(inst, "y", "duality")));
    const BallSpec ball = ball_from_json(need(inst, "radii", "duality"));
    DualPairOptions dpo;
    dpo.seed = cfg.seed;
    dpo.cost.restarts = cfg.restarts;
    dpo.cost.grad_tol = cfg.tol;
    const DualPair pair = build_dual_pair(X, ball, dpo);
    CostOptions co;
    co.restarts = cfg.restarts;
    co.grad_tol = cfg.tol;
    co.seed = cfg.seed;
    const GapResult g = duality_gap(X, Y, pair, co);
    const double d2 = l2_norm(X.rep) * l2_norm(X.rep) +
                      l2_norm(Y.rep) * l2_norm(Y.rep) - 2.0 * g.cost;
    const double d = std::sqrt(std::max(0.0, d2));
    const bool pass =
        g.gap >= kGapLower && (!g.certified || g.gap <= kGapUpper);
    const std::string id = instance_id(inst, idx);
    run.results.push_back(Json{{"id", id},
                               {"C", g.cost},
                               {"d", d},
                               {"gap", g.gap},
                               {"certified", g.certified},
                               {"converged", g.converged},
                               {"pass", pass}});
    CsvRow row;
    row.id = id;
    row.command = "duality";
    row.C = g.cost;
    row.d = d;
    row.gap = g.gap;
    row.pass = pass;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && pass;
    std::cout << "duality " << id << ": gap=" << format_double(g.gap)
              << (pass ? " pass" : " FAIL") << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// interpolate
// ---------------------------------------------------------------------------

RunOutput run_interpolate(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "algebra", "x", "y", "t", "aligned"},
                "interpolate instance");
    const AlgebraPtr alg =
        algebra_from_json(need(inst, "algebra", "interpolate"));
    const Tuple x = tuple_from_json(alg, need(inst, "x", "interpolate"));
    const Tuple y = tuple_from_json(alg, need(inst, "y", "interpolate"));
    const double t = opt_number(inst, "t", 0.5);
    const bool aligned =
        inst.contains("aligned") && inst.at("aligned").get<bool>();
    Tuple y_al = y;
    bool certified = false;
    if (!aligned) {
      CostOptions co;
      co.restarts = cfg.restarts;
      co.grad_tol = cfg.tol;
      co.seed = cfg.seed;
      const Coupling c =
          optimal_coupling(make_orbit_type(x), make_orbit_type(y), co);
      y_al = c.y_aligned;
      certified = c.certified;
    }
    const InterpolationReport rep =
        displacement_interpolation_check(x, y_al, t);
    const std::string id = instance_id(inst, idx);
    run.results.push_back(Json{{"id", id},
                               {"t", rep.t},
                               {"dim_mid", rep.dim_mid},
                               {"dim_joint", rep.dim_joint},
                               {"equal", rep.equal},
                               {"flagged", rep.flagged},
                               {"aligned_input", aligned},
                               {"certified", certified}});
    CsvRow row;
    row.id = id;
    row.command = "interpolate";
    row.dim_mid = rep.dim_mid;
    row.dim_joint = rep.dim_joint;
    row.pass = rep.equal;
    run.rows.push_back(row);
    run.any_flag = run.any_flag || rep.flagged;
    std::cout << "interpolate " << id << ": dim_mid=" << rep.dim_mid
              << " dim_joint=" << rep.dim_joint
              << (rep.flagged ? " (flagged: strict drop)" : "") << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// realize
// ---------------------------------------------------------------------------

RunOutput run_realize(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "algebra", "a", "z", "t", "r"},
                "realize instance");
    const AlgebraPtr alg = algebra_from_json(need(inst, "algebra", "realize"));
    const Tuple a = tuple_from_json(alg, need(inst, "a", "realize"));
    const Element z = element_from_json(alg, need(inst, "z", "realize"));
    RealizationParams par;
    par.t = opt_number(inst, "t", par.t);
    par.r = opt_number(inst, "r", par.r);
    par.opt.seed = cfg.seed;
    par.opt.tol = cfg.tol;
    par.opt.restarts = cfg.restarts;
    const RealizationReport rep = definable_realization_demo(a, z, par);
    const std::string id = instance_id(inst, idx);
    run.results.push_back(Json{{"id", id},
                               {"err", rep.err},
                               {"value", rep.value},
                               {"converged", rep.converged},
                               {"pass", rep.pass}});
    CsvRow row;
    row.id = id;
    row.command = "realize";
    row.err = rep.err;
    row.pass = rep.pass;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && rep.pass;
    std::cout << "realize " << id << ": err=" << format_double(rep.err)
              << (rep.pass ? " pass" : " FAIL") << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// regularize
// ---------------------------------------------------------------------------

RunOutput run_regularize(const CliConfig& cfg) {
  RunOutput run;
  int idx = 0;
  for (const Json& inst : split_instances(load_json_file(cfg.instance))) {
    ensure_keys(inst, {"id", "algebra", "arity", "predicate"},
                "regularize instance");
    const AlgebraPtr alg =
        algebra_from_json(need(inst, "algebra", "regularize"));
    const Json& aj = need(inst, "arity", "regularize");
    if (!aj.is_number_integer() || aj.get<int>() < 1)
      throw Error(Errc::bad_input, "regularize: arity must be a positive int");
    const int arity = aj.get<int>();
    InnerOptions inner;
    inner.restarts = cfg.restarts;
    inner.tol = cfg.tol;
    inner.seed = cfg.seed;
    const Predicate phi = predicate_from_json(
        alg, arity, need(inst, "predicate", "regularize"), inner);
    RegularizationParams par;
    par.t = cfg.t;
    par.outer = BallSpec::uniform(arity, cfg.r);
    par.inner = BallSpec::uniform(arity, cfg.R);
    const Envelope env = lasry_lions(phi, par, inner);
    const auto value = [&env](const Tuple& x) { return env.value(x); };

    const CheckReport cvx = semiconvexity_check(
        value, 1.0 / cfg.t, alg, par.outer, 10, cfg.seed, cfg.eps);
    const CheckReport ccv = semiconcavity_check(
        value, 1.0 / cfg.t, alg, par.outer, 10, cfg.seed + 1, cfg.eps);

    // analytic envelope gradient against central differences
    Rng rng(cfg.seed, "regularize-fd");
    double max_rel = 0.0;
    for (int s = 0; s < 3; ++s) {
      const Tuple x = random_tuple_in_ball(alg, par.outer, rng);
      const EnvGradResult g = envelope_gradient(env, x);
      const Tuple fd = fd_gradient(value, x);
      max_rel = std::max(max_rel, l2_dist(g.grad, fd) / (1.0 + l2_norm(fd)));
    }
    const bool grad_pass = max_rel <= kFdRelTol;
    const bool pass = cvx.pass && ccv.pass && grad_pass;
    const std::string id = instance_id(inst, idx);
    run.results.push_back(
        Json{{"id", id},
             {"semiconvex",
              Json{{"max_violation", cvx.max_violation}, {"pass", cvx.pass}}},
             {"semiconcave",
              Json{{"max_violation", ccv.max_violation}, {"pass", ccv.pass}}},
             {"gradient",
              Json{{"max_rel_err", max_rel}, {"pass", grad_pass}}},
             {"pass", pass}});
    CsvRow row;
    row.id = id;
    row.command = "regularize";
    row.err = max_rel;
    row.pass = pass;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && pass;
    std::cout << "regularize " << id << ": " << (pass ? "pass" : "FAIL")
              << "\n";
    ++idx;
  }
  return run;
}

// ---------------------------------------------------------------------------
// checks: the frozen example suite
// ---------------------------------------------------------------------------

Element diag_element(const AlgebraPtr& alg, std::vector<double> entries) {
  Element d(alg);
  int pos = 0;
  for (int b = 0; b < alg->num_blocks(); ++b)
    for (int i = 0; i < alg->block_dim(b); ++i)
      d.block(b)(i, i) = Cx(entries[pos++], 0.0);
  return d;
}

RunOutput run_checks(const CliConfig& cfg) {
  if (cfg.suite != "all")
    throw Error(Errc::bad_input, "unknown suite '" + cfg.suite + "'");
  RunOutput run;
  const auto record = [&](const std::string& name, bool pass, Json detail,
                          CsvRow row) {
    detail["id"] = name;
    detail["pass"] = pass;
    run.results.push_back(std::move(detail));
    row.id = name;
    row.command = "checks";
    row.pass = pass;
    run.rows.push_back(row);
    run.all_pass = run.all_pass && pass;
    std::cout << "check " << name << ": " << (pass ? "pass" : "FAIL") << "\n";
  };

  auto m2 = matrix_algebra(2);
  auto m3 = matrix_algebra(3);

  {  // two-point algebra inside M_1 + M_2: dcl picks out both center summands
    const Inclusion inc = make_inclusion(
        matrix_algebra(1),
        make_algebra({{1, Rational(1, 3)}, {2, Rational(2, 3)}}), {{1, 2}});
    bool agreement = false;
    Json detail = dcl_result(inc, cfg.seed, &agreement);
    const bool pass = agreement && detail["dcl_dim"] == 2 &&
                      detail["acl_dim"] == 5;
    record("dcl-example", pass, std::move(detail), CsvRow{});
  }

  {  // transport frozen pair: C = 3, d = 1
    CostOptions co;
    co.seed = cfg.seed;
    const WassersteinResult w =
        wasserstein(make_orbit_type(Tuple({diag_element(m2, {0, 2})})),
                    make_orbit_type(Tuple({diag_element(m2, {1, 3})})), co);
    const bool pass = std::abs(w.cost.value - 3.0) <= 1e-6 &&
                      std::abs(w.d - 1.0) <= 1e-6 && w.cost.converged;
    CsvRow row;
    row.C = w.cost.value;
    row.d = w.d;
    record("transport-example", pass,
           Json{{"C", w.cost.value}, {"d", w.d}}, row);
  }

  {  // duality gap at the certified coupling of the frozen pair
    const OrbitType X = make_orbit_type(Tuple({diag_element(m2, {0, 2})}));
    const OrbitType Y = make_orbit_type(Tuple({diag_element(m2, {1, 3})}));
    DualPairOptions dpo;
    dpo.seed = cfg.seed;
    const DualPair pair = build_dual_pair(X, BallSpec::uniform(1, 2.0), dpo);
    const GapResult g = duality_gap(X, Y, pair);
    const bool pass =
        g.certified && g.gap >= kGapLower && g.gap <= kGapUpper;
    CsvRow row;
    row.C = g.cost;
    row.gap = g.gap;
    record("duality-gap", pass, Json{{"C", g.cost}, {"gap", g.gap}}, row);
  }

  {  // sorted coupling preserves the generated-algebra dimension
    const Tuple x({diag_element(m3, {0.1, 0.5, 0.9})});
    const Tuple y({diag_element(m3, {0.2, 0.6, 1.3})});
    const Coupling c = optimal_coupling(make_orbit_type(x), make_orbit_type(y));
    const InterpolationReport rep =
        displacement_interpolation_check(x, c.y_aligned, 0.5);
    CsvRow row;
    row.dim_mid = rep.dim_mid;
    row.dim_joint = rep.dim_joint;
    record("interpolate-sorted", rep.equal && c.certified,
           Json{{"dim_mid", rep.dim_mid}, {"dim_joint", rep.dim_joint}}, row);
  }

  {  // anti-sorted alignment must show the strict dimension drop
    const Tuple x({diag_element(m2, {0, 1})});
    const Tuple y_bad({diag_element(m2, {1, 0})});
    const InterpolationReport rep =
        displacement_interpolation_check(x, y_bad, 0.5);
    const bool pass = rep.flagged && rep.dim_mid == 1 && rep.dim_joint == 2;
    CsvRow row;
    row.dim_mid = rep.dim_mid;
    row.dim_joint = rep.dim_joint;
    record("interpolate-antisorted", pass,
           Json{{"dim_mid", rep.dim_mid}, {"dim_joint", rep.dim_joint}}, row);
  }

  {  // gradient recovery of the identity inside W*(diag(0.3, 0.9))
    RealizationParams par;
    par.opt.seed = cfg.seed + 11;
    const RealizationReport rep = definable_realization_demo(
        Tuple({diag_element(m2, {0.3, 0.9})}), Element::identity(m2), par);
    CsvRow row;
    row.err = rep.err;
    record("realize-identity", rep.pass, Json{{"err", rep.err}}, row);
  }

  {  // conditional-expectation monotonicity over the diagonal subalgebra
    Element e11(m2), e22(m2);
    e11.block(0)(0, 0) = Cx(1, 0);
    e22.block(0)(1, 1) = Cx(1, 0);
    const Subalgebra A = make_subalgebra({e11, e22});
    std::vector<AffinePiece> pieces;
    for (double c : {-0.8, 0.4, 1.1}) {
      AffinePiece p;
      p.slope = Tuple({Cx(c, 0) * e11 - Cx(0.5 * c, 0) * e22});
      p.offset = 0.1 * c;
      pieces.push_back(p);
    }
    const ExpectationReport rep =
        expectation_inequality_check(A, pieces, 1, 200, cfg.seed + 13);
    record("expectation-diagonal", rep.pass,
           Json{{"max_violation", rep.max_violation},
                {"samples", rep.samples}},
           CsvRow{});
  }

  {  // Lasry-Lions smoothing of Re tau(x^2) keeps its declared regularity
    TracePoly p;
    p.algebra = m2;
    p.arity = 1;
    Monomial mono;
    mono.coeff = Cx(1, 0);
    mono.letters = {Letter::variable(0), Letter::variable(0)};
    p.monos.push_back(mono);
    const Predicate phi = Predicate::trace_re(p);
    RegularizationParams par;
    par.t = 0.1;
    par.outer = BallSpec::uniform(1, 1.0);
    par.inner = BallSpec::uniform(1, 2.0);
    InnerOptions inner;
    inner.restarts = 2;  // nested solves; the objectives are well-conditioned
    inner.seed = cfg.seed + 17;
    const Envelope env = lasry_lions(phi, par, inner);
    const auto value = [&env](const Tuple& x) { return env.value(x); };
    const CheckReport cvx = semiconvexity_check(value, 1.0 / par.t, m2,
                                                par.outer, 8, cfg.seed + 19);
    const CheckReport ccv = semiconcavity_check(value, 1.0 / par.t, m2,
                                                par.outer, 8, cfg.seed + 23);
    record("regularize-tracepoly", cvx.pass && ccv.pass,
           Json{{"semiconvex_violation", cvx.max_violation},
                {"semiconcave_violation", ccv.max_violation}},
           CsvRow{});
  }

  return run;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tracelab: numeric experiments on tracial matrix algebras"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CliConfig cfg;
  const char* env_dir = std::getenv("TRACELAB_OUT_DIR");
  cfg.out_dir = env_dir ? env_dir : ".";

  const auto add_common = [&](CLI::App* sub, bool needs_instance) {
    auto* inst =
        sub->add_option("--instance", cfg.instance, "instance JSON file");
    if (needs_instance) inst->required();
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--restarts", cfg.restarts, "optimizer restarts");
    sub->add_option("--tol", cfg.tol, "optimizer gradient tolerance");
    sub->add_option("--out-dir", cfg.out_dir,
                    "output directory (default: $TRACELAB_OUT_DIR or .)");
  };

  add_common(app.add_subcommand("dcl", "definable closure of an inclusion"),
             true);
  add_common(app.add_subcommand("transport", "orbit cost and distance"),
             true);
  add_common(app.add_subcommand("duality", "dual pair and duality gap"),
             true);
  add_common(
      app.add_subcommand("interpolate", "displacement interpolation check"),
      true);
  add_common(app.add_subcommand("realize", "definable realization demo"),
             true);
  CLI::App* reg =
      app.add_subcommand("regularize", "two-sided envelope with checkers");
  add_common(reg, true);
  reg->add_option("--t", cfg.t, "envelope parameter t");
  reg->add_option("--r", cfg.r, "outer (supremum) ball radius");
  reg->add_option("--R", cfg.R, "inner (infimum) ball radius");
  reg->add_option("--eps", cfg.eps, "midpoint check tolerance");
  CLI::App* checks =
      app.add_subcommand("checks", "frozen example suite");
  add_common(checks, false);
  checks->add_option("--suite", cfg.suite, "suite name (all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  // Nested envelope solves get a calmer default restart budget; an explicit
  // --restarts still wins.
  if (app.got_subcommand("regularize") && reg->count("--restarts") == 0)
    cfg.restarts = 2;

  const auto started = std::chrono::steady_clock::now();
  int code = 0;
  try {
    RunOutput run;
    if (app.got_subcommand("dcl")) {
      cfg.command = "dcl";
      run = run_dcl(cfg);
    } else if (app.got_subcommand("transport")) {
      cfg.command = "transport";
      run = run_transport(cfg);
    } else if (app.got_subcommand("duality")) {
      cfg.command = "duality";
      run = run_duality(cfg);
    } else if (app.got_subcommand("interpolate")) {
      cfg.command = "interpolate";
      run = run_interpolate(cfg);
    } else if (app.got_subcommand("realize")) {
      cfg.command = "realize";
      run = run_realize(cfg);
    } else if (app.got_subcommand("regularize")) {
      cfg.command = "regularize";
      run = run_regularize(cfg);
    } else {
      cfg.command = "checks";
      run = run_checks(cfg);
    }
    write_outputs(cfg, run);
    code = exit_code(run);
  } catch (const Error& e) {
    std::cerr << "error[" << static_cast<int>(e.code) << "]: " << e.what()
              << "\n";
    code = e.code == Errc::bad_input ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 1;
  }
  const auto elapsed = std::chrono::steady_clock::now() - started;
  std::fprintf(
      stderr, "wall_ms=%lld\n",
      static_cast<long long>(
          std::chrono::duration_cast<std::chrono::milliseconds>(elapsed)
              .count()));
  return code;
}
