// Definable and algebraic closures of embedded subalgebras, together with
// a Monte-Carlo automorphism fixed-point oracle and relative commutants.
//
// Ambient blocks j, j' are equivalent when they have equal dimension, equal
// exact trace weight, and identical multiplicity columns k(., j) = k(., j').
// Writing p_C for the central projection onto the blocks of a class C, the
// definable closure of the embedded copy of A is
//   dcl(A) = span{ p_C * iota(a) : C a class, a in A },
// while the algebraic closure at finite dimension is the whole algebra.

#pragma once

#include <vector>

#include "tracelab/algebra.hpp"

namespace tracelab {

struct BlockClassPartition {
  std::vector<std::vector<int>> classes;  // members sorted ascending
  std::vector<int> class_of;              // ambient block -> class index
  int num_classes() const { return static_cast<int>(classes.size()); }
};

BlockClassPartition block_class_partition(const Inclusion& inc);

struct ClosureResult {
  Subalgebra algebra;             // validated unital *-subalgebra
  BlockClassPartition partition;
  int dim = 0;                    // numerical rank of the spanning family
  int dim_formula = 0;            // sum_C sum_{i : k(i,C) > 0} m_i^2
};

// Definable closure of iota(A) inside the ambient algebra.
ClosureResult dcl_finite(const Inclusion& inc);

// Algebraic closure at finite dimension: the full ambient algebra.
Subalgebra acl_finite(const AlgebraPtr& amb);

// L2-orthonormal basis of the relative commutant iota(A)' cap M.
std::vector<Element> relative_commutant(const Subalgebra& A);

// Relative bicommutant (iota(A)' cap M)' cap M.
std::vector<Element> relative_bicommutant(const Subalgebra& A);

// Fixed-point oracle: samples trace-preserving *-automorphisms that fix the
// embedded subalgebra pointwise -- block permutations within equivalence
// classes composed with conjugations exp(i h) . exp(-i h) for self-adjoint
// h in the relative commutant -- stacks Theta - id over all samples, and
// returns an L2-orthonormal basis of the common fixed space (singular
// values below `threshold` count as zero).
struct FixedPointOptions {
  int samples = 128;
  double threshold = 1e-8;
  std::uint64_t seed = 1;
};

std::vector<Element> automorphism_fixed_oracle(
    const Inclusion& inc, const FixedPointOptions& opt = {});

// max over a in basis_a of || a/||a|| - P_span(onb_b)(a/||a||) ||.
double span_containment_gap(const std::vector<Element>& basis_a,
                            const std::vector<Element>& onb_b);

// Random inclusion generator used by the randomized check suites: samples
// sub dims, a multiplicity matrix with positive rows, ambient dims from the
// column-fit identity and exact rational weights (duplicating columns with
// equal weights with probability ~1/2 so that nontrivial classes occur).
Inclusion random_inclusion(Rng& rng, int max_total_dim = 36);

}  // namespace tracelab
