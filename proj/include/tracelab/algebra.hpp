// Core types for finite-dimensional tracial *-algebras.
//
// An algebra is a weighted direct sum of complex matrix blocks
//   M = M_{n_1}(C) + ... + M_{n_J}(C),   tau = sum_j beta_j * tr_{n_j},
// where tr_n is the normalized trace on M_n(C) and the beta_j are exact
// positive rationals summing to 1.  Elements carry one dense complex matrix
// per block; tuples are finite lists of elements of a common algebra.
//
// The L2 inner product is <x,y> = tau(x* y); its real part turns the tuple
// space into a real inner-product space of dimension 2 * arity * sum_j n_j^2.

#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>

namespace tracelab {

using Cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Rational = boost::rational<std::int64_t>;

// Largest allowed total complex dimension sum_j n_j^2 of an algebra.
inline constexpr int kMaxAlgebraDim = 64;

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

enum class Errc {
  bad_input = 1,   // malformed JSON / schema violations
  invariant = 2,   // dimension, weight or trace-compatibility violations
  budget = 3,      // optimizer budget exhausted where convergence is required
};

struct Error : std::runtime_error {
  Errc code;
  Error(Errc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// Parse "p/q" or "p" into an exact rational; throws Error(bad_input).
Rational parse_rational(const std::string& s);
std::string format_rational(const Rational& q);

// ---------------------------------------------------------------------------
// TracialAlgebra
// ---------------------------------------------------------------------------

struct Block {
  int dim = 0;          // n_j >= 1
  Rational weight;      // beta_j > 0, exact
};

class TracialAlgebra {
 public:
  // Validates: dims >= 1, weights > 0, sum of weights == 1 exactly,
  // sum_j n_j^2 <= kMaxAlgebraDim.  Throws Error(invariant) otherwise.
  explicit TracialAlgebra(std::vector<Block> blocks);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_dim(int j) const { return blocks_[j].dim; }
  const Rational& weight(int j) const { return blocks_[j].weight; }
  double weight_d(int j) const { return weights_d_[j]; }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Total complex dimension sum_j n_j^2.
  int dim() const { return dim_; }

  bool same_structure(const TracialAlgebra& other) const;

 private:
  std::vector<Block> blocks_;
  std::vector<double> weights_d_;
  int dim_ = 0;
};

using AlgebraPtr = std::shared_ptr<const TracialAlgebra>;

AlgebraPtr make_algebra(std::vector<Block> blocks);
// Single block M_n(C) with weight 1.
AlgebraPtr matrix_algebra(int n);

// ---------------------------------------------------------------------------
// Element / Tuple
// ---------------------------------------------------------------------------

class Element {
 public:
  Element() = default;
  explicit Element(AlgebraPtr alg);                       // zero element
  Element(AlgebraPtr alg, std::vector<Mat> blocks);       // validates shapes

  static Element identity(const AlgebraPtr& alg);

  const AlgebraPtr& algebra() const { return alg_; }
  int num_blocks() const { return static_cast<int>(mats_.size()); }
  const Mat& block(int j) const { return mats_[j]; }
  Mat& block(int j) { return mats_[j]; }

  Element adjoint() const;

  Element& operator+=(const Element& o);
  Element& operator-=(const Element& o);
  Element& operator*=(Cx c);

  friend Element operator+(Element a, const Element& b) { return a += b; }
  friend Element operator-(Element a, const Element& b) { return a -= b; }
  friend Element operator*(Cx c, Element a) { return a *= c; }
  friend Element operator*(Element a, Cx c) { return a *= c; }
  friend Element operator*(const Element& a, const Element& b);  // blockwise product

 private:
  AlgebraPtr alg_;
  std::vector<Mat> mats_;
};

// Tuple of elements of a common algebra (possibly empty arity).
class Tuple {
 public:
  Tuple() = default;
  Tuple(AlgebraPtr alg, int arity);                 // zero tuple
  explicit Tuple(std::vector<Element> entries);     // validates common algebra

  const AlgebraPtr& algebra() const { return alg_; }
  int arity() const { return static_cast<int>(entries_.size()); }
  const Element& operator[](int k) const { return entries_[k]; }
  Element& operator[](int k) { return entries_[k]; }
  const std::vector<Element>& entries() const { return entries_; }

  Tuple& operator+=(const Tuple& o);
  Tuple& operator-=(const Tuple& o);
  Tuple& operator*=(double c);
  friend Tuple operator+(Tuple a, const Tuple& b) { return a += b; }
  friend Tuple operator-(Tuple a, const Tuple& b) { return a -= b; }
  friend Tuple operator*(double c, Tuple a) { return a *= c; }

  // Concatenation x ++ y (same algebra).
  static Tuple concat(const Tuple& a, const Tuple& b);
  // Sub-tuple [begin, begin+count).
  Tuple slice(int begin, int count) const;

 private:
  AlgebraPtr alg_;
  std::vector<Element> entries_;
};

// Per-entry operator-norm radii r_k > 0 defining the ball
//   D_r = { x : op_norm(x_k) <= r_k for all k }.
struct BallSpec {
  std::vector<double> radii;

  int arity() const { return static_cast<int>(radii.size()); }
  // Euclidean norm |r| of the radius vector; dominates the L2 norm of any
  // tuple in the ball.
  double l2_radius() const;
  static BallSpec uniform(int arity, double r);
};

// ---------------------------------------------------------------------------
// Trace, norms, ball geometry
// ---------------------------------------------------------------------------

Cx trace(const Element& x);
Cx l2_inner(const Element& x, const Element& y);        // tau(x* y)
double l2_norm(const Element& x);
double l2_dist(const Element& x, const Element& y);
double op_norm(const Element& x);                       // max block sigma_max

// Tuple versions: <x,y> = sum_k tau(x_k* y_k).
Cx l2_inner(const Tuple& x, const Tuple& y);
double l2_norm(const Tuple& x);
double l2_dist(const Tuple& x, const Tuple& y);
double op_norm_max(const Tuple& x);                     // max_k op_norm(x_k)

bool is_selfadjoint(const Element& x, double tol = 1e-10);

// L2-nearest point of the operator-norm ball: per block, clip singular
// values at the radius.  Separable across blocks and tuple entries.
Element project_ball(const Element& x, double radius);
Tuple project_ball(const Tuple& x, const BallSpec& ball);
// delta(x) = L2 distance to the ball (0 inside); convex, 1-Lipschitz.
double dist_to_ball(const Tuple& x, const BallSpec& ball);
bool in_ball(const Tuple& x, const BallSpec& ball, double slack = 0.0);

// ---------------------------------------------------------------------------
// L2-isometric vectorization
// ---------------------------------------------------------------------------
// Complex coordinates scaled by sqrt(beta_j / n_j) per block, so the
// Euclidean dot product of coordinate vectors equals the L2 inner product.

int vec_dim(const TracialAlgebra& alg);                  // == alg.dim()
Eigen::VectorXcd l2_vec(const Element& x);
Element l2_unvec(const AlgebraPtr& alg, const Eigen::VectorXcd& v);
// Real coordinates of a tuple: [Re; Im] per complex coordinate, entrywise.
int real_dim(const TracialAlgebra& alg, int arity);
Eigen::VectorXd l2_rvec(const Tuple& x);
Tuple l2_runvec(const AlgebraPtr& alg, int arity, const Eigen::VectorXd& v);

// L2-orthonormal basis of the span of vs (rank revealed by SVD).
std::vector<Element> orthonormalize(const std::vector<Element>& vs,
                                    double tol = 1e-10);
// ||z - P_span(z)|| with P_span the L2 projection onto span(onb);
// onb must be L2-orthonormal.
double span_residual(const std::vector<Element>& onb, const Element& z);

// ---------------------------------------------------------------------------
// Subalgebras and conditional expectation
// ---------------------------------------------------------------------------

// A validated unital *-subalgebra, stored as an L2-orthonormal basis.
struct Subalgebra {
  AlgebraPtr ambient;
  std::vector<Element> onb;
  int dim() const { return static_cast<int>(onb.size()); }
};

// Checks that span(basis) contains the identity and is closed under
// adjoints and products within tol; throws Error(invariant) otherwise.
Subalgebra make_subalgebra(const std::vector<Element>& basis,
                           double tol = 1e-9);

// Trace-preserving conditional expectation: L2-orthogonal projection onto
// the subalgebra.  E is unital, positive, and an A-bimodule map.
Element conditional_expectation(const Subalgebra& A, const Element& z);
Tuple conditional_expectation(const Subalgebra& A, const Tuple& z);

// ---------------------------------------------------------------------------
// Inclusions
// ---------------------------------------------------------------------------

// Unital trace-preserving embedding of `sub` into `amb` described by the
// multiplicity matrix k(i,j): block i of the subalgebra appears k(i,j)
// times on the diagonal of ambient block j.  Validation requires
//   sum_i k(i,j) * m_i == n_j                 (column fit)
//   sum_j k(i,j) * beta_j / n_j == alpha_i / m_i   (exact rational traces)
// where alpha, m are subalgebra weights/dims and beta, n ambient ones.
struct Inclusion {
  AlgebraPtr sub;
  AlgebraPtr amb;
  std::vector<std::vector<int>> mult;  // I x J
};

Inclusion make_inclusion(AlgebraPtr sub, AlgebraPtr amb,
                         std::vector<std::vector<int>> mult);

Element embed(const Inclusion& inc, const Element& x);
Tuple embed(const Inclusion& inc, const Tuple& x);

// Image of the subalgebra as a validated subalgebra of the ambient algebra.
Subalgebra embedded_subalgebra(const Inclusion& inc);

// ---------------------------------------------------------------------------
// Generated subalgebra
// ---------------------------------------------------------------------------

struct GeneratedAlgebra {
  std::vector<Element> onb;   // L2-orthonormal basis of W*(x)
  int dim = 0;
};

// Smallest unital *-subalgebra containing the tuple entries: span-closure
// of {1, x_k, x_k*} under products, grown until stable.
GeneratedAlgebra generated_algebra(const Tuple& x, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

// Seeded random stream; (seed, tag) pairs give independent reproducible
// streams.  Gaussian variates use an explicit Box-Muller transform so that
// output is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string_view tag = "");

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                  // [0, 1)
  double gaussian();                 // N(0, 1)
  Cx gaussian_cx();                  // standard complex Gaussian
  int uniform_int(int lo, int hi);   // inclusive bounds

 private:
  std::uint64_t state_next();
  // mt19937_64 is fully specified by the standard, hence reproducible.
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Element random_element(const AlgebraPtr& alg, Rng& rng);       // Ginibre blocks
Element random_selfadjoint(const AlgebraPtr& alg, Rng& rng);   // GUE-style blocks
Element random_unitary(const AlgebraPtr& alg, Rng& rng);       // per-block Haar
Tuple random_tuple(const AlgebraPtr& alg, int arity, Rng& rng);
Tuple random_selfadjoint_tuple(const AlgebraPtr& alg, int arity, Rng& rng);
// Uniform-ish sample inside the operator-norm ball (Ginibre rescaled into
// the ball, then shrunk by a uniform factor).
Tuple random_tuple_in_ball(const AlgebraPtr& alg, const BallSpec& ball,
                           Rng& rng);
// Same, restricted to self-adjoint entries.
Tuple random_selfadjoint_tuple_in_ball(const AlgebraPtr& alg,
                                       const BallSpec& ball, Rng& rng);

}  // namespace tracelab
