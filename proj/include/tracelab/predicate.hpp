// Scalar-valued predicates on tuples: trace polynomials, continuous
// connectives, and ball-constrained sup/inf quantifiers.
//
// A predicate phi of arity m maps tuples x = (x_1, ..., x_m) over a fixed
// algebra to real numbers.  Leaves are Re or Im of complex trace polynomials
//   sum_mono c * tau(L_1 ... L_p),
// where each letter L is a variable slot x_k, an adjoint x_k*, or a constant
// element of the algebra.  Composite predicates are built from the whitelisted
// connectives add, mul, scale, neg, abs, max, min and from sup/inf over an
// operator-norm ball, which binds the trailing variable slots of the child.
//
// Every predicate evaluates deterministically for a fixed seed and budget and
// carries symbolic regularity metadata (value, Lipschitz and curvature bounds
// per ball) derived from coefficient norms.

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tracelab/algebra.hpp"

namespace tracelab {

// ---------------------------------------------------------------------------
// Trace polynomials
// ---------------------------------------------------------------------------

struct Letter {
  int var = -1;        // >= 0: variable slot; < 0: constant element
  bool star = false;   // apply adjoint
  Element cst;         // used iff var < 0

  static Letter variable(int k, bool star = false) {
    Letter l;
    l.var = k;
    l.star = star;
    return l;
  }
  static Letter constant(Element a, bool star = false) {
    Letter l;
    l.star = star;
    l.cst = std::move(a);
    return l;
  }
};

struct Monomial {
  Cx coeff{0.0, 0.0};
  std::vector<Letter> letters;   // empty product means tau(1) = 1
};

// value(x) = sum_m coeff_m * tau(prod of letters_m evaluated at x)
struct TracePoly {
  AlgebraPtr algebra;
  int arity = 0;
  std::vector<Monomial> monos;
};

// Complex value of a trace polynomial at a tuple.
Cx trace_poly_value(const TracePoly& p, const Tuple& x);

// ---------------------------------------------------------------------------
// Ball-constrained first-order optimization
// ---------------------------------------------------------------------------

struct InnerOptions {
  int restarts = 8;        // multi-starts (zero start + random starts)
  int budget = 2000;       // iteration budget per start
  double tol = 1e-9;       // stationarity tolerance on the gradient mapping
  std::uint64_t seed = 7;  // rng stream seed for the random starts
};

struct BallOptResult {
  double value = 0.0;
  Tuple arg;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  int iters = 0;           // gradient evaluations across all starts
  bool boundary = false;   // some entry of arg sits on the ball boundary
};

// Maximizes (or minimizes) a smooth function over the operator-norm ball
// D_ball by projected gradient ascent with Armijo backtracking, switching to
// fixed-step residual contraction once objective increments fall below
// floating-point resolution.  The returned value is always a certified
// lower (maximize) or upper (minimize) bound attained at `arg`; `converged`
// reports whether the gradient-mapping residual reached `opt.tol`.
//
// Starts: the projections of `extra_starts`, then the zero tuple, then random
// tuples in the ball until max(opt.restarts, #extra + 1) starts are used.
// Ties between starts resolve to the earliest, so reruns are deterministic.
BallOptResult ball_optimize(const std::function<double(const Tuple&)>& value,
                            const std::function<Tuple(const Tuple&)>& grad,
                            const AlgebraPtr& alg, const BallSpec& ball,
                            bool maximize, const InnerOptions& opt,
                            std::string_view tag,
                            const std::vector<Tuple>& extra_starts = {});

// ---------------------------------------------------------------------------
// Predicate expression tree
// ---------------------------------------------------------------------------

struct EvalInfo {
  double value = 0.0;
  bool converged = true;   // all inner optimizations reached tolerance
  bool boundary = false;   // some inner witness sits on its ball boundary
};

// Declared regularity of a predicate: phi is c-semiconvex when
// phi + (c/2)||.||^2 is convex, c-semiconcave when phi - (c/2)||.||^2 is
// concave.  +inf means no constant is declared; 0-semiconvex means convex.
// Flags are set by the operations that construct regularized predicates and
// are validated, not trusted, by the property checkers.
struct PredFlags {
  double semiconvex_c = std::numeric_limits<double>::infinity();
  double semiconcave_c = std::numeric_limits<double>::infinity();
};

class Predicate;

namespace detail {
struct PredNode;
Predicate make_predicate(std::shared_ptr<const PredNode> n);
}

class Predicate {
 public:
  Predicate() = default;

  // Leaves.
  static Predicate trace_re(TracePoly p);
  static Predicate trace_im(TracePoly p);
  static Predicate constant(AlgebraPtr alg, int arity, double value);
  // x -> Re<x, a> = sum_k Re tau(x_k* a_k); arity = a.arity().
  static Predicate inner_re(const Tuple& a);
  // x -> ||x||^2 = sum_k tau(x_k* x_k).
  static Predicate squared_norm(AlgebraPtr alg, int arity);
  // x -> sum_{k < m} ||x_{i0+k} - x_{j0+k}||^2 on tuples of the given arity.
  static Predicate squared_dist(AlgebraPtr alg, int arity, int i0, int j0,
                                int m);

  // Connectives.
  friend Predicate operator+(const Predicate& a, const Predicate& b);
  friend Predicate operator-(const Predicate& a, const Predicate& b);
  static Predicate mul(const Predicate& a, const Predicate& b);
  static Predicate scale(double s, const Predicate& a);
  static Predicate neg(const Predicate& a) { return scale(-1.0, a); }
  static Predicate abs(const Predicate& a);
  static Predicate max(const Predicate& a, const Predicate& b);
  static Predicate min(const Predicate& a, const Predicate& b);
  static Predicate max_of(std::vector<Predicate> parts);

  // Quantifiers bind the trailing ball.arity() variable slots of `child`.
  // When `seed_from` is nonempty it lists, per bound slot, a free slot whose
  // value (projected into the ball) seeds the inner optimizer.  Each
  // quantifier node caches its latest solve, so evaluating and then
  // differentiating at the same point optimizes once (single-threaded use;
  // results are identical to recomputation).
  static Predicate ball_sup(Predicate child, BallSpec ball,
                            InnerOptions opt = {},
                            std::vector<int> seed_from = {});
  static Predicate ball_inf(Predicate child, BallSpec ball,
                            InnerOptions opt = {},
                            std::vector<int> seed_from = {});

  // Rebuilds the predicate with variable slot k renamed to slot_of_old[k];
  // the result has the given (free) arity.
  Predicate remap(int new_arity, const std::vector<int>& slot_of_old) const;

  bool valid() const { return node_ != nullptr; }
  int arity() const;
  const AlgebraPtr& algebra() const;

  const PredFlags& flags() const;
  Predicate with_flags(PredFlags f) const;   // shallow copy carrying f

  double eval(const Tuple& x) const { return eval_full(x).value; }
  EvalInfo eval_full(const Tuple& x) const;

  // L2 gradient: d/ds phi(x + s h)|_0 = Re<h, gradient(x)>.  Quantifiers use
  // the envelope rule at the inner witness; abs/max/min pick the active
  // branch (ties resolve to the first child).
  Tuple gradient(const Tuple& x) const;

  // Symbolic bounds valid on the ball D_b (radii for the free slots):
  //   |phi(x)| <= value_bound,
  //   |phi(x) - phi(y)| <= lipschitz * ||x - y||_2,
  //   |phi(x+y+z) - phi(x+y) - phi(x+z) + phi(x)| <= curvature ||y|| ||z||
  // (curvature is +inf for non-smooth connectives and quantifiers).
  double value_bound(const BallSpec& ball) const;
  double lipschitz(const BallSpec& ball) const;
  double curvature(const BallSpec& ball) const;
  // Modulus of continuity on D_b: omega(delta) = lipschitz(ball) * delta.
  double modulus(const BallSpec& ball, double delta) const {
    return lipschitz(ball) * delta;
  }

 private:
  explicit Predicate(std::shared_ptr<const detail::PredNode> n)
      : node_(std::move(n)) {}
  std::shared_ptr<const detail::PredNode> node_;

  std::vector<double> lip_by_var(const BallSpec& ball) const;
  friend struct detail::PredNode;
  friend Predicate detail::make_predicate(
      std::shared_ptr<const detail::PredNode> n);
};

}  // namespace tracelab
