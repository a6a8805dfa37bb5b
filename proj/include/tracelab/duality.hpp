// Monge-Kantorovich duality for unitary orbit types.
//
// For a tuple X in a single-factor algebra with operator-norm ball D_r, the
// orbit support function
//   psi0(y) = sup_u Re<u X u*, y>   (= the transport cost C(X, tp(y)))
// is a supremum of affine maps, hence convex, and its ball-constrained
// Legendre transform phi0 = sup_{y in D_r} [Re<x,y> - psi0(y)] completes a
// dual pair: phi0(x) + psi0(y) >= Re<x,y> with equality along optimal
// couplings, and phi0 == 0 on the orbit of X.
//
// Numerically both functions are evaluated as maxima of certified candidates
// (explicit orbit slopes, assignment alignments, transport-ascent aligners,
// polar-factor witnesses), so every reported value is attained by a feasible
// point and the admissibility and zero-gap identities hold by construction
// rather than by optimizer luck.  The pair extends outside the ball via the
// penalties 1/2 delta^2 and 2|r| delta, which preserve convexity and global
// admissibility while leaving the values on D_r untouched.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tracelab/algebra.hpp"
#include "tracelab/convex.hpp"
#include "tracelab/predicate.hpp"
#include "tracelab/transport.hpp"

namespace tracelab {

// ---------------------------------------------------------------------------
// Dual pairs
// ---------------------------------------------------------------------------

struct DualPairOptions {
  int orbit_probes = 8;        // Haar slopes u X u* beyond the identity one
  int random_candidates = 4;   // frozen random ball points seeding phi0
  std::uint64_t seed = 101;
  // Include a transport-ascent candidate in psi0 evaluations ("optimized"
  // part of the orbit supremum; the slopes are the "sampled" part).
  bool optimized_sup = true;
  // Effort of that inner transport ascent.  Every ascent value is the cost
  // of a feasible unitary, so low effort only loosens the supremum, never
  // breaks certificates.
  CostOptions cost{/*restarts=*/4, /*max_iters=*/800, /*grad_tol=*/1e-8,
                   /*seed=*/0};
  int dual_iters = 120;        // simplex descent steps generating phi0 seeds
  int polar_every = 12;        // harvest a polar candidate every this many
};

// One certified evaluation of the orbit supremum: value = Re<slope, y> for
// an explicit orbit point `slope` = u X u*.
struct OrbitSup {
  double value = 0.0;
  Tuple slope;
  bool exact = false;       // commuting assignment enumeration was conclusive
  bool converged = true;    // transport ascent (when used) met its tolerance
};

// One certified evaluation of a ball-constrained Legendre supremum:
// value = Re<x, witness> - psi0(witness) with witness in D_r.
struct SupportValue {
  double value = 0.0;
  Tuple witness;
  bool converged = true;
};

// Extended pair (phi2, psi2) built from on-ball functions by distance
// penalties; see extend_global.
struct GlobalPair {
  std::function<double(const Tuple&)> phi2;
  std::function<double(const Tuple&)> psi2;
};

class DualPair {
 public:
  const Tuple& base() const { return x_; }
  const BallSpec& ball() const { return r_; }
  const DualPairOptions& options() const { return opt_; }
  // Orbit slopes a_s = u_s X u_s*; slot 0 is X itself.
  const std::vector<Tuple>& slopes() const { return slopes_; }
  bool commuting() const { return commuting_; }

  // Orbit support function: best certified alignment of X with y among the
  // stored slopes, the per-eigenframe assignment maximum (exact when both
  // sides commute), and a transport ascent.
  OrbitSup psi0_sup(const Tuple& y) const;
  double psi0(const Tuple& y) const { return psi0_sup(y).value; }

  // Ball-constrained Legendre transform of psi0.  The supremum is taken
  // over an explicit candidate list (zero, the projection of x, polar
  // factors x - a_s, witnesses harvested from a dual simplex descent, the
  // frozen random seeds, and `extra_candidates`), each evaluated exactly.
  SupportValue phi0_sup(const Tuple& x,
                        const std::vector<Tuple>& extra_candidates = {}) const;
  double phi0(const Tuple& x) const { return phi0_sup(x).value; }

  // Legendre transform of phi0 back over D_r.  On D_r it coincides with
  // psi0 because every subgradient of psi0 is an orbit point inside D_r;
  // off the ball the evaluator reports the same certified lower bound,
  // which the coherent margin below sharpens with pair-context slopes.
  double psi1(const Tuple& y) const { return psi0_sup(y).value; }

  // Globally admissible extension phi2 = phi0 + 1/2 delta^2 + 2|r| delta,
  // psi2 = psi1 + 1/2 delta^2 (delta = L2 distance to D_r).
  double phi2(const Tuple& x) const;
  double psi2(const Tuple& y) const;
  GlobalPair extended() const;

  // phi0(x) + psi0(y) - Re<x,y> evaluated coherently (the same psi0(y)
  // value feeds the candidate list of phi0), hence >= 0 up to rounding for
  // x, y in D_r.
  double on_ball_margin(const Tuple& x, const Tuple& y) const;

  // phi2(x) + psi2(y) - Re<x,y> evaluated coherently: the Legendre witness
  // at the projection of x is shared between both sides, which makes the
  // margin >= (delta(x) - delta(y))^2 / 2 >= 0 up to rounding for all
  // inputs, inside or outside D_r.
  double margin(const Tuple& x, const Tuple& y) const;

 private:
  friend DualPair build_dual_pair(const OrbitType&, const BallSpec&,
                                  const DualPairOptions&);
  DualPair() = default;

  double slope_max(const Tuple& y) const;               // tier: stored slopes
  double psi1_with_context(const Tuple& y, const Tuple& x_hat,
                           double phi_at_hat) const;

  Tuple x_;
  BallSpec r_;
  DualPairOptions opt_;
  std::vector<Tuple> slopes_;
  std::vector<Tuple> random_candidates_;
  bool commuting_ = false;
  Mat frame_;                 // joint eigenframe of X when commuting
  Eigen::MatrixXd eigs_;      // arity x n rows of eigenvalues in that frame
};

// Validates X in D_r (operator norms within radii, matching arity) and
// freezes the slope set; throws Error(bad_input) otherwise.
DualPair build_dual_pair(const OrbitType& X, const BallSpec& r,
                         const DualPairOptions& opt = {});

// Generic global extension: phi2 = phi0 + 1/2 delta^2 + 2|r| delta and
// psi2 = psi1 + 1/2 delta^2 for arbitrary evaluators admissible on D_r.
// delta and delta^2 are convex, so convexity is preserved, values on D_r
// are unchanged, and admissibility becomes global.
GlobalPair extend_global(std::function<double(const Tuple&)> phi0,
                         std::function<double(const Tuple&)> psi1,
                         const BallSpec& r);

// ---------------------------------------------------------------------------
// Couplings and the duality gap
// ---------------------------------------------------------------------------

struct Coupling {
  double cost = 0.0;
  Tuple y_aligned;          // u Y u* with Re<X, y_aligned> = cost
  bool certified = false;   // commuting enumeration (exact) vs best found
  bool converged = false;
};

// Optimal coupling of two orbit types: exact permutation alignment in a
// joint eigenframe when both tuples commute entrywise (n <= 8), transport
// ascent otherwise.
Coupling optimal_coupling(const OrbitType& X, const OrbitType& Y,
                          const CostOptions& opt = {});

struct GapResult {
  double gap = 0.0;         // phi(X) + psi(y_aligned) - cost
  double cost = 0.0;
  bool certified = false;
  bool converged = false;
  Tuple y_aligned;
};

// Duality gap of a pair against the optimal coupling of (X, Y).  For the
// pair constructed from X the gap is >= 0 by weak duality and == 0 at
// certified couplings.
GapResult duality_gap(const OrbitType& X, const OrbitType& Y,
                      const DualPair& pair, const CostOptions& opt = {});
GapResult duality_gap(const OrbitType& X, const OrbitType& Y,
                      const std::function<double(const Tuple&)>& phi,
                      const std::function<double(const Tuple&)>& psi,
                      const CostOptions& opt = {});

// ---------------------------------------------------------------------------
// Displacement interpolation
// ---------------------------------------------------------------------------

struct InterpolationReport {
  double t = 0.0;
  int dim_mid = 0;       // dim W*((1-t) x + t y_aligned)
  int dim_joint = 0;     // dim W*(x ++ y_aligned)
  bool equal = false;
  bool flagged = false;  // strict drop: observed only off optimal couplings
};

// Compares the algebra generated by the displacement midpoint with the
// algebra generated jointly by x and the aligned y.  The midpoint algebra
// is always contained in the joint one; equality is expected along optimal
// couplings and a strict drop is flagged for inspection, not failed.
// Throws Error(bad_input) unless t in (0,1) and the tuples are compatible.
InterpolationReport displacement_interpolation_check(const Tuple& x,
                                                     const Tuple& y_aligned,
                                                     double t,
                                                     double rank_tol = 1e-9);

// ---------------------------------------------------------------------------
// Definable realization
// ---------------------------------------------------------------------------

inline constexpr double kRealizationTol = 1e-5;

struct RealizationParams {
  double t = 0.1;
  double r = 1.0;
  InnerOptions opt{/*restarts=*/2, /*budget=*/2000, /*tol=*/1e-9, /*seed=*/7};
};

struct RealizationReport {
  double err = 0.0;         // || grad psi(0) - z ||_2
  bool pass = false;        // err <= kRealizationTol and solves converged
  bool converged = false;
  double value = 0.0;       // psi(0)
  Element grad;             // recovered element
};

// Builds phi(x) = Re<x, z>, regularizes it over the balls (r, 2r), and
// differentiates the envelope at 0; the gradient recovers z whenever the
// step constraint t * op_norm(z) < r/2 keeps the witness interior.
// Preconditions (violations throw Error(bad_input)): z lies in W*(a) and
// the step constraint holds.
RealizationReport definable_realization_demo(const Tuple& a, const Element& z,
                                             const RealizationParams& par);

// ---------------------------------------------------------------------------
// Monotonicity under conditional expectation
// ---------------------------------------------------------------------------

// phi_A(x) = max_s [ Re<x, slope_s> - offset_s ] with slopes in A^arity.
struct AffinePiece {
  Tuple slope;
  double offset = 0.0;
};

struct ExpectationReport {
  int samples = 0;
  double max_violation = -std::numeric_limits<double>::infinity();
  bool pass = false;
};

// Verifies phi_A(E_A[z]) <= phi_A(z) + tol on random tuples z.  The
// inequality is exact because Re<E_A z, a> = Re<z, a> for a in A, the
// conditional expectation being the L2-orthogonal projection onto A.
// Slopes with entries outside A are rejected with Error(bad_input).
ExpectationReport expectation_inequality_check(
    const Subalgebra& A, const std::vector<AffinePiece>& pieces, int arity,
    int samples, std::uint64_t seed, double tol = 1e-9);

}  // namespace tracelab
