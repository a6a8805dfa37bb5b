// Ball-constrained convex analysis on tuples: Legendre transforms,
// inf/sup-convolutions with quadratic penalties, the two-sided Lasry-Lions
// regularization, envelope gradients, and property checkers that validate
// declared regularity on random samples.
//
// All constructions work with the squared L2 distance
//   d(x, z)^2 = sum_k ||x_k - z_k||_2^2
// and operator-norm balls D_r.  Inner problems are solved by projected
// gradient with multi-starts (see ball_optimize); every returned value is the
// best certified bound found, and non-convergence is reported through flags
// rather than hidden.

#pragma once

#include <functional>
#include <limits>

#include "tracelab/algebra.hpp"
#include "tracelab/predicate.hpp"

namespace tracelab {

// ---------------------------------------------------------------------------
// Regularization operations
// ---------------------------------------------------------------------------

// phi0(x) = sup_{y in D_r} [ Re<x, y> - psi(y) ].  Convex (supremum of affine
// maps) and |r|-Lipschitz; the symbolic tree metadata reproduces both.
Predicate legendre(const Predicate& psi, const BallSpec& r,
                   const InnerOptions& opt = {});

// psi(x) = inf_{z in D_R} [ phi(z) + (1/2t) d(x, z)^2 ].  1/t-semiconcave;
// if phi is declared 1/u-semiconvex with t < u, the output is declared
// 1/(u-t)-semiconvex.
Predicate inf_conv(const Predicate& phi, double t, const BallSpec& R,
                   const InnerOptions& opt = {});

// psi(x) = sup_{z in D_r} [ phi(z) - (1/2t) d(x, z)^2 ].  Mirror image of
// inf_conv: 1/t-semiconvex, with the dual semiconcavity propagation.
Predicate sup_conv(const Predicate& phi, double t, const BallSpec& r,
                   const InnerOptions& opt = {});

struct RegularizationParams {
  double t = 0.1;
  // Declared semiconvexity budget of the base predicate: when finite and the
  // base carries no semiconvexity flag of its own, it is treated as
  // 1/u-semiconvex for flag propagation (requires t < u).
  double u = std::numeric_limits<double>::infinity();
  BallSpec outer;   // D_r: ball of the outer supremum (domain of interest)
  BallSpec inner;   // D_R: ball of the inner infimum, entrywise >= outer
};

// Two-sided regularization
//   psi(x) = sup_{w in D_r} inf_{z in D_R} [ phi(z) + (1/4t) d(w,z)^2
//                                            - (1/2t) d(x,w)^2 ],
// realized as sup_conv(inf_conv(phi, 2t, D_R), t, D_r).  The envelope keeps
// the pieces so that gradients can be read off the outer witness.
struct Envelope {
  Predicate phi;    // base predicate
  Predicate ic;     // inf_conv(phi, 2t, inner)
  Predicate psi;    // full regularization, declared 1/t-semiconvex+concave
  RegularizationParams par;
  InnerOptions opt;

  double value(const Tuple& x) const { return psi.eval(x); }
};

Envelope lasry_lions(const Predicate& phi, const RegularizationParams& par,
                     const InnerOptions& opt = {});

struct EnvGradResult {
  double value = 0.0;
  Tuple grad;          // (w* - x) / t at the outer witness w*
  Tuple witness;       // w*
  bool converged = false;
  bool boundary = false;   // w* on the boundary of D_r
};

// Supergradient of the regularized predicate at x via the envelope rule.
EnvGradResult envelope_gradient(const Envelope& env, const Tuple& x);

// Central-difference L2 gradient with step h (default 1e-5 * (1 + ||x||)),
// used by checkers that must not trust analytic derivatives.
Tuple fd_gradient(const std::function<double(const Tuple&)>& f, const Tuple& x,
                  double h = 0.0);

// ---------------------------------------------------------------------------
// Property checkers
// ---------------------------------------------------------------------------

struct CheckReport {
  int samples = 0;
  double bound = 0.0;     // constant used on the right-hand side
  double tol = 0.0;
  double max_violation = -std::numeric_limits<double>::infinity();
  bool precheck_failed = false;   // equivariance / self-adjointness rejection
  bool pass = false;              // !precheck_failed && max_violation <= tol
};

using ScalarFn = std::function<double(const Tuple&)>;
using TupleFn = std::function<Tuple(const Tuple&)>;
using ElementFn = std::function<Element(const Tuple&)>;

// f((1-l)x0 + l x1) <= (1-l)f(x0) + l f(x1) + (c/2) l(1-l) ||x1-x0||^2 for
// l in {1/4, 1/2, 3/4} on sampled pairs from D_ball.
CheckReport semiconvexity_check(const ScalarFn& f, double c,
                                const AlgebraPtr& alg, const BallSpec& ball,
                                int samples, std::uint64_t seed,
                                double tol = 1e-8);
// Mirror image: f(midpoint) >= chord - (c/2) l(1-l) ||x1-x0||^2.
CheckReport semiconcavity_check(const ScalarFn& f, double c,
                                const AlgebraPtr& alg, const BallSpec& ball,
                                int samples, std::uint64_t seed,
                                double tol = 1e-8);

// |f(x+y+z) - f(x+y) - f(x+z) + f(x)| <= c ||y|| ||z|| with x sampled from
// the half ball and y, z small enough to stay inside D_ball.
CheckReport second_difference_check(const ScalarFn& f, double c,
                                    const AlgebraPtr& alg,
                                    const BallSpec& ball, int samples,
                                    std::uint64_t seed, double tol = 1e-8);

// For c-strongly convex f: ||x'-x|| <= (1/c) ||grad f(x') - grad f(x)||,
// with central-difference gradients.
CheckReport strong_convexity_expansion_check(const ScalarFn& f, double c,
                                             const AlgebraPtr& alg,
                                             const BallSpec& ball, int samples,
                                             std::uint64_t seed,
                                             double tol = 1e-6);

// ||G(x') - G(x)|| <= lip ||x' - x|| on sampled pairs.
CheckReport gradient_lipschitz_check(const TupleFn& grad, double lip,
                                     const AlgebraPtr& alg,
                                     const BallSpec& ball, int samples,
                                     std::uint64_t seed, double tol = 1e-6);

// For an equivariant self-adjoint map F on a single-factor algebra:
//   diam(Spec(F(x))) <= L * sqrt(sum_j diam(Spec(x_j))^2) + tol.
// lip > 0 supplies L; lip <= 0 estimates it from sampled pairs.  Rejects
// (precheck_failed) when F fails the unitary-equivariance or
// self-adjointness probes at 1e-8.
CheckReport spectral_diameter_check(const ElementFn& F, double lip,
                                    const AlgebraPtr& alg,
                                    const BallSpec& ball, int samples,
                                    std::uint64_t seed, double tol = 1e-6);

// Range bound on D_r: op_norm(F_i(x)) <= t + 9 L |r| + tol with
// t = max_i |tau(F_i(0))| and L estimated from sampled pairs.
CheckReport range_bound_check(const TupleFn& F, const AlgebraPtr& alg,
                              const BallSpec& ball, int samples,
                              std::uint64_t seed, double tol = 1e-6);

}  // namespace tracelab
