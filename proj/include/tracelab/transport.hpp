// Optimal transport between unitary orbits of matrix tuples.
//
// At finite dimension the distribution of a tuple X in M_n(C) (with the
// normalized trace) is its unitary orbit {u X u* : u in U(n)}.  The
// transport cost between two orbit types is
//   C(X, Y) = sup_{u in U(n)} Re <X, u Y u*>,
// and the squared distance is d^2 = ||X||^2 + ||Y||^2 - 2 C(X, Y).
// The supremum is computed by projected Riemannian gradient ascent on U(n)
// with a Cayley retraction, Armijo backtracking, and deterministic
// multi-start; every reported value is the cost of a feasible unitary and
// hence a certified lower bound of the supremum.

#pragma once

#include "tracelab/algebra.hpp"

namespace tracelab {

// Unitary orbit of a representative tuple in a single-factor algebra
// M_n(C) with trace weight 1.
struct OrbitType {
  Tuple rep;
};

// Validates: single block, weight exactly 1, arity >= 1.
OrbitType make_orbit_type(Tuple rep);

struct CostOptions {
  int restarts = 20;       // restart 0 starts at u = 1, the rest at Haar
  int max_iters = 5000;    // per restart
  double grad_tol = 1e-9;  // on the Frobenius norm of the Riemannian gradient
  std::uint64_t seed = 0;
};

struct CostResult {
  double value = 0.0;      // best feasible cost found (lower bound of sup)
  Element aligner;         // u achieving `value`
  bool converged = false;  // best restart met grad_tol within max_iters
  int best_restart = -1;
  int iters = 0;           // iterations used by the best restart
};

CostResult cost_orbit(const OrbitType& X, const OrbitType& Y,
                      const CostOptions& opt = {});

struct WassersteinResult {
  double d = 0.0;
  double d2_raw = 0.0;     // before clamping tiny negatives to zero
  bool clamped = false;
  CostResult cost;
  Tuple y_aligned;         // u Y u* for the best aligner u
};

WassersteinResult wasserstein(const OrbitType& X, const OrbitType& Y,
                              const CostOptions& opt = {});

// Exact cost for a pair of single self-adjoint matrices (n <= 8): with both
// spectra sorted ascending, C = (1/n) sum_i lambda_i mu_i.
double assignment_cost(const Element& X, const Element& Y);

// Exact cost for tuples of jointly diagonal matrices (n <= 8): brute-force
// maximum over all n! permutation alignments.  For diagonal tuples this is
// the exact orbit supremum, because the cost as a function of u depends
// only on the doubly stochastic matrix (|u_ij|^2) and is linear there.
double permutation_cost(const Tuple& X, const Tuple& Y);

}  // namespace tracelab
