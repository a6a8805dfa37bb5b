#include "tracelab/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace tracelab {

// ---------------------------------------------------------------------------
// Rationals
// ---------------------------------------------------------------------------

Rational parse_rational(const std::string& s) {
  const auto bad = [&] {
    return Error(Errc::bad_input, "invalid rational literal: '" + s + "'");
  };
  std::size_t slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      std::size_t pos = 0;
      long long p = std::stoll(s, &pos);
      if (pos != s.size()) throw bad();
      return Rational(p, 1);
    }
    std::size_t pos = 0;
    long long p = std::stoll(s.substr(0, slash), &pos);
    if (pos != slash) throw bad();
    long long q = std::stoll(s.substr(slash + 1), &pos);
    if (pos != s.size() - slash - 1) throw bad();
    if (q == 0) throw bad();
    return Rational(p, q);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw bad();
  }
}

std::string format_rational(const Rational& q) {
  if (q.denominator() == 1) return std::to_string(q.numerator());
  return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

// ---------------------------------------------------------------------------
// TracialAlgebra
// ---------------------------------------------------------------------------

TracialAlgebra::TracialAlgebra(std::vector<Block> blocks)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty())
    throw Error(Errc::invariant, "algebra needs at least one block");
  Rational total(0);
  for (const Block& b : blocks_) {
    if (b.dim < 1) throw Error(Errc::invariant, "block dimension must be >= 1");
    if (b.weight <= Rational(0))
      throw Error(Errc::invariant, "trace weights must be positive");
    total += b.weight;
    dim_ += b.dim * b.dim;
  }
  if (total != Rational(1))
    throw Error(Errc::invariant, "trace weights must sum to 1 exactly");
  if (dim_ > kMaxAlgebraDim)
    throw Error(Errc::invariant, "total dimension sum n_j^2 exceeds cap " +
                                     std::to_string(kMaxAlgebraDim));
  weights_d_.reserve(blocks_.size());
  for (const Block& b : blocks_)
    weights_d_.push_back(boost::rational_cast<double>(b.weight));
}

bool TracialAlgebra::same_structure(const TracialAlgebra& other) const {
  if (num_blocks() != other.num_blocks()) return false;
  for (int j = 0; j < num_blocks(); ++j)
    if (blocks_[j].dim != other.blocks_[j].dim ||
        blocks_[j].weight != other.blocks_[j].weight)
      return false;
  return true;
}

AlgebraPtr make_algebra(std::vector<Block> blocks) {
  return std::make_shared<const TracialAlgebra>(std::move(blocks));
}

AlgebraPtr matrix_algebra(int n) {
  return make_algebra({Block{n, Rational(1)}});
}

// ---------------------------------------------------------------------------
// Element
// ---------------------------------------------------------------------------

Element::Element(AlgebraPtr alg) : alg_(std::move(alg)) {
  mats_.reserve(alg_->num_blocks());
  for (int j = 0; j < alg_->num_blocks(); ++j)
    mats_.push_back(Mat::Zero(alg_->block_dim(j), alg_->block_dim(j)));
}

Element::Element(AlgebraPtr alg, std::vector<Mat> blocks)
    : alg_(std::move(alg)), mats_(std::move(blocks)) {
  if (static_cast<int>(mats_.size()) != alg_->num_blocks())
    throw Error(Errc::invariant, "element block count mismatch");
  for (int j = 0; j < alg_->num_blocks(); ++j)
    if (mats_[j].rows() != alg_->block_dim(j) ||
        mats_[j].cols() != alg_->block_dim(j))
      throw Error(Errc::invariant, "element block shape mismatch");
}

Element Element::identity(const AlgebraPtr& alg) {
  Element e(alg);
  for (int j = 0; j < alg->num_blocks(); ++j)
    e.mats_[j] = Mat::Identity(alg->block_dim(j), alg->block_dim(j));
  return e;
}

Element Element::adjoint() const {
  Element r(*this);
  for (Mat& m : r.mats_) m = m.adjoint().eval();
  return r;
}

namespace {
void require_same_algebra(const AlgebraPtr& a, const AlgebraPtr& b) {
  if (a == b) return;
  if (!a || !b || !a->same_structure(*b))
    throw Error(Errc::invariant, "elements live in different algebras");
}
}  // namespace

Element& Element::operator+=(const Element& o) {
  require_same_algebra(alg_, o.alg_);
  for (std::size_t j = 0; j < mats_.size(); ++j) mats_[j] += o.mats_[j];
  return *this;
}

Element& Element::operator-=(const Element& o) {
  require_same_algebra(alg_, o.alg_);
  for (std::size_t j = 0; j < mats_.size(); ++j) mats_[j] -= o.mats_[j];
  return *this;
}

Element& Element::operator*=(Cx c) {
  for (Mat& m : mats_) m *= c;
  return *this;
}

Element operator*(const Element& a, const Element& b) {
  require_same_algebra(a.alg_, b.alg_);
  Element r(a.alg_);
  for (std::size_t j = 0; j < a.mats_.size(); ++j)
    r.mats_[j] = a.mats_[j] * b.mats_[j];
  return r;
}

// ---------------------------------------------------------------------------
// Tuple
// ---------------------------------------------------------------------------

Tuple::Tuple(AlgebraPtr alg, int arity) : alg_(std::move(alg)) {
  entries_.assign(arity, Element(alg_));
}

Tuple::Tuple(std::vector<Element> entries) : entries_(std::move(entries)) {
  if (entries_.empty())
    throw Error(Errc::invariant, "tuple needs at least one entry");
  alg_ = entries_[0].algebra();
  for (const Element& e : entries_) require_same_algebra(alg_, e.algebra());
}

Tuple& Tuple::operator+=(const Tuple& o) {
  if (arity() != o.arity())
    throw Error(Errc::invariant, "tuple arity mismatch");
  for (int k = 0; k < arity(); ++k) entries_[k] += o.entries_[k];
  return *this;
}

Tuple& Tuple::operator-=(const Tuple& o) {
  if (arity() != o.arity())
    throw Error(Errc::invariant, "tuple arity mismatch");
  for (int k = 0; k < arity(); ++k) entries_[k] -= o.entries_[k];
  return *this;
}

Tuple& Tuple::operator*=(double c) {
  for (Element& e : entries_) e *= Cx(c, 0);
  return *this;
}

Tuple Tuple::concat(const Tuple& a, const Tuple& b) {
  require_same_algebra(a.algebra(), b.algebra());
  std::vector<Element> es = a.entries_;
  es.insert(es.end(), b.entries_.begin(), b.entries_.end());
  return Tuple(std::move(es));
}

Tuple Tuple::slice(int begin, int count) const {
  if (begin < 0 || count < 1 || begin + count > arity())
    throw Error(Errc::invariant, "tuple slice out of range");
  std::vector<Element> es(entries_.begin() + begin,
                          entries_.begin() + begin + count);
  return Tuple(std::move(es));
}

double BallSpec::l2_radius() const {
  double s = 0.0;
  for (double r : radii) s += r * r;
  return std::sqrt(s);
}

BallSpec BallSpec::uniform(int arity, double r) {
  return BallSpec{std::vector<double>(static_cast<std::size_t>(arity), r)};
}

// ---------------------------------------------------------------------------
// Trace and norms
// ---------------------------------------------------------------------------

Cx trace(const Element& x) {
  Cx t(0, 0);
  const TracialAlgebra& alg = *x.algebra();
  for (int j = 0; j < alg.num_blocks(); ++j)
    t += alg.weight_d(j) * x.block(j).trace() / double(alg.block_dim(j));
  return t;
}

Cx l2_inner(const Element& x, const Element& y) {
  require_same_algebra(x.algebra(), y.algebra());
  Cx t(0, 0);
  const TracialAlgebra& alg = *x.algebra();
  for (int j = 0; j < alg.num_blocks(); ++j) {
    // tau restricted to block j is beta_j/n_j times the matrix trace.
    Cx blk = (x.block(j).adjoint() * y.block(j)).trace();
    t += alg.weight_d(j) / double(alg.block_dim(j)) * blk;
  }
  return t;
}

double l2_norm(const Element& x) {
  double s = 0.0;
  const TracialAlgebra& alg = *x.algebra();
  for (int j = 0; j < alg.num_blocks(); ++j)
    s += alg.weight_d(j) / double(alg.block_dim(j)) * x.block(j).squaredNorm();
  return std::sqrt(s);
}

double l2_dist(const Element& x, const Element& y) { return l2_norm(x - y); }

double op_norm(const Element& x) {
  double m = 0.0;
  for (int j = 0; j < x.num_blocks(); ++j) {
    if (x.block(j).rows() == 1) {
      m = std::max(m, std::abs(x.block(j)(0, 0)));
      continue;
    }
    Eigen::JacobiSVD<Mat> svd(x.block(j));
    m = std::max(m, svd.singularValues()(0));
  }
  return m;
}

Cx l2_inner(const Tuple& x, const Tuple& y) {
  if (x.arity() != y.arity())
    throw Error(Errc::invariant, "tuple arity mismatch");
  Cx t(0, 0);
  for (int k = 0; k < x.arity(); ++k) t += l2_inner(x[k], y[k]);
  return t;
}

double l2_norm(const Tuple& x) {
  double s = 0.0;
  for (int k = 0; k < x.arity(); ++k) {
    double n = l2_norm(x[k]);
    s += n * n;
  }
  return std::sqrt(s);
}

double l2_dist(const Tuple& x, const Tuple& y) { return l2_norm(x - y); }

double op_norm_max(const Tuple& x) {
  double m = 0.0;
  for (int k = 0; k < x.arity(); ++k) m = std::max(m, op_norm(x[k]));
  return m;
}

bool is_selfadjoint(const Element& x, double tol) {
  return l2_dist(x, x.adjoint()) <= tol * (1.0 + l2_norm(x));
}

// ---------------------------------------------------------------------------
// Ball geometry
// ---------------------------------------------------------------------------

Element project_ball(const Element& x, double radius) {
  if (!(radius > 0))
    throw Error(Errc::invariant, "ball radius must be positive");
  Element r(x);
  for (int j = 0; j < x.num_blocks(); ++j) {
    const Mat& m = x.block(j);
    if (m.rows() == 1) {
      Cx v = m(0, 0);
      double a = std::abs(v);
      r.block(j)(0, 0) = a <= radius ? v : v * (radius / a);
      continue;
    }
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues();
    if (s(0) <= radius) continue;  // already inside
    for (int i = 0; i < s.size(); ++i) s(i) = std::min(s(i), radius);
    r.block(j) = svd.matrixU() * s.asDiagonal().toDenseMatrix().cast<Cx>() *
                 svd.matrixV().adjoint();
  }
  return r;
}

Tuple project_ball(const Tuple& x, const BallSpec& ball) {
  if (ball.arity() != x.arity())
    throw Error(Errc::invariant, "ball arity mismatch");
  Tuple r(x);
  for (int k = 0; k < x.arity(); ++k) r[k] = project_ball(x[k], ball.radii[k]);
  return r;
}

double dist_to_ball(const Tuple& x, const BallSpec& ball) {
  return l2_dist(x, project_ball(x, ball));
}

bool in_ball(const Tuple& x, const BallSpec& ball, double slack) {
  if (ball.arity() != x.arity())
    throw Error(Errc::invariant, "ball arity mismatch");
  for (int k = 0; k < x.arity(); ++k)
    if (op_norm(x[k]) > ball.radii[k] + slack) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Vectorization
// ---------------------------------------------------------------------------

int vec_dim(const TracialAlgebra& alg) { return alg.dim(); }

Eigen::VectorXcd l2_vec(const Element& x) {
  const TracialAlgebra& alg = *x.algebra();
  Eigen::VectorXcd v(alg.dim());
  int off = 0;
  for (int j = 0; j < alg.num_blocks(); ++j) {
    int n = alg.block_dim(j);
    double scale = std::sqrt(alg.weight_d(j) / double(n));
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) v(off++) = scale * x.block(j)(r, c);
  }
  return v;
}

Element l2_unvec(const AlgebraPtr& alg, const Eigen::VectorXcd& v) {
  if (v.size() != alg->dim())
    throw Error(Errc::invariant, "vectorization length mismatch");
  Element x(alg);
  int off = 0;
  for (int j = 0; j < alg->num_blocks(); ++j) {
    int n = alg->block_dim(j);
    double scale = std::sqrt(alg->weight_d(j) / double(n));
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) x.block(j)(r, c) = v(off++) / scale;
  }
  return x;
}

int real_dim(const TracialAlgebra& alg, int arity) {
  return 2 * arity * alg.dim();
}

Eigen::VectorXd l2_rvec(const Tuple& x) {
  int d = x.algebra()->dim();
  Eigen::VectorXd v(2 * x.arity() * d);
  for (int k = 0; k < x.arity(); ++k) {
    Eigen::VectorXcd c = l2_vec(x[k]);
    v.segment(2 * k * d, d) = c.real();
    v.segment((2 * k + 1) * d, d) = c.imag();
  }
  return v;
}

Tuple l2_runvec(const AlgebraPtr& alg, int arity, const Eigen::VectorXd& v) {
  int d = alg->dim();
  if (v.size() != 2 * arity * d)
    throw Error(Errc::invariant, "vectorization length mismatch");
  std::vector<Element> es;
  es.reserve(arity);
  for (int k = 0; k < arity; ++k) {
    Eigen::VectorXcd c =
        v.segment(2 * k * d, d).cast<Cx>() +
        Cx(0, 1) * v.segment((2 * k + 1) * d, d).cast<Cx>();
    es.push_back(l2_unvec(alg, c));
  }
  return Tuple(std::move(es));
}

std::vector<Element> orthonormalize(const std::vector<Element>& vs,
                                    double tol) {
  if (vs.empty()) return {};
  const AlgebraPtr alg = vs[0].algebra();
  Eigen::MatrixXcd A(alg->dim(), static_cast<int>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) A.col(i) = l2_vec(vs[i]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  double cutoff = tol * std::max(1.0, s.size() ? s(0) : 0.0);
  std::vector<Element> onb;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) onb.push_back(l2_unvec(alg, svd.matrixU().col(i)));
  return onb;
}

double span_residual(const std::vector<Element>& onb, const Element& z) {
  Element res(z);
  for (const Element& b : onb) res -= l2_inner(b, z) * b;
  return l2_norm(res);
}

// ---------------------------------------------------------------------------
// Subalgebra / conditional expectation
// ---------------------------------------------------------------------------

Subalgebra make_subalgebra(const std::vector<Element>& basis, double tol) {
  if (basis.empty())
    throw Error(Errc::invariant, "subalgebra basis must be non-empty");
  AlgebraPtr amb = basis[0].algebra();
  for (const Element& b : basis) require_same_algebra(amb, b.algebra());
  std::vector<Element> onb = orthonormalize(basis, 1e-10);
  if (onb.empty())
    throw Error(Errc::invariant, "subalgebra basis spans only {0}");

  const Element one = Element::identity(amb);
  if (span_residual(onb, one) > tol)
    throw Error(Errc::invariant, "subalgebra span does not contain 1");
  for (const Element& b : onb) {
    if (span_residual(onb, b.adjoint()) > tol)
      throw Error(Errc::invariant, "subalgebra span not closed under adjoint");
  }
  for (const Element& a : onb)
    for (const Element& b : onb) {
      Element p = a * b;
      if (span_residual(onb, p) > tol * std::max(1.0, l2_norm(p)))
        throw Error(Errc::invariant, "subalgebra span not closed under products");
    }
  return Subalgebra{amb, std::move(onb)};
}

Element conditional_expectation(const Subalgebra& A, const Element& z) {
  require_same_algebra(A.ambient, z.algebra());
  Element e(A.ambient);
  for (const Element& b : A.onb) e += l2_inner(b, z) * b;
  return e;
}

Tuple conditional_expectation(const Subalgebra& A, const Tuple& z) {
  std::vector<Element> es;
  es.reserve(z.arity());
  for (int k = 0; k < z.arity(); ++k)
    es.push_back(conditional_expectation(A, z[k]));
  return Tuple(std::move(es));
}

// ---------------------------------------------------------------------------
// Inclusions
// ---------------------------------------------------------------------------

Inclusion make_inclusion(AlgebraPtr sub, AlgebraPtr amb,
                         std::vector<std::vector<int>> mult) {
  const int I = sub->num_blocks();
  const int J = amb->num_blocks();
  if (static_cast<int>(mult.size()) != I)
    throw Error(Errc::invariant, "multiplicity matrix has wrong row count");
  for (const auto& row : mult) {
    if (static_cast<int>(row.size()) != J)
      throw Error(Errc::invariant, "multiplicity matrix has wrong column count");
    for (int k : row)
      if (k < 0) throw Error(Errc::invariant, "multiplicities must be >= 0");
  }
  // Column fit: each ambient block is filled exactly.
  for (int j = 0; j < J; ++j) {
    int fill = 0;
    for (int i = 0; i < I; ++i) fill += mult[i][j] * sub->block_dim(i);
    if (fill != amb->block_dim(j))
      throw Error(Errc::invariant,
                  "multiplicities do not fill ambient block " +
                      std::to_string(j) + " (" + std::to_string(fill) + " vs " +
                      std::to_string(amb->block_dim(j)) + ")");
  }
  // Exact rational trace compatibility:
  //   sum_j k(i,j) beta_j / n_j == alpha_i / m_i  for every sub block i.
  // (The identity pairs ambient weights beta_j with ambient dims n_j; the
  // variant pairing sub weights with ambient dims is rejected by this check.)
  for (int i = 0; i < I; ++i) {
    Rational lhs(0);
    for (int j = 0; j < J; ++j)
      lhs += Rational(mult[i][j]) * amb->weight(j) / Rational(amb->block_dim(j));
    Rational rhs = sub->weight(i) / Rational(sub->block_dim(i));
    if (lhs != rhs)
      throw Error(Errc::invariant,
                  "trace compatibility fails for sub block " + std::to_string(i) +
                      ": sum_j k(i,j) beta_j/n_j = " + format_rational(lhs) +
                      " but alpha_i/m_i = " + format_rational(rhs));
  }
  return Inclusion{std::move(sub), std::move(amb), std::move(mult)};
}

Element embed(const Inclusion& inc, const Element& x) {
  require_same_algebra(inc.sub, x.algebra());
  Element y(inc.amb);
  const int I = inc.sub->num_blocks();
  for (int j = 0; j < inc.amb->num_blocks(); ++j) {
    int off = 0;
    for (int i = 0; i < I; ++i) {
      int m = inc.sub->block_dim(i);
      for (int c = 0; c < inc.mult[i][j]; ++c) {
        y.block(j).block(off, off, m, m) = x.block(i);
        off += m;
      }
    }
  }
  return y;
}

Tuple embed(const Inclusion& inc, const Tuple& x) {
  std::vector<Element> es;
  es.reserve(x.arity());
  for (int k = 0; k < x.arity(); ++k) es.push_back(embed(inc, x[k]));
  return Tuple(std::move(es));
}

Subalgebra embedded_subalgebra(const Inclusion& inc) {
  // Matrix units of each sub block, embedded, give an exact spanning set.
  std::vector<Element> basis;
  for (int i = 0; i < inc.sub->num_blocks(); ++i) {
    int m = inc.sub->block_dim(i);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        Element e(inc.sub);
        e.block(i)(r, c) = Cx(1, 0);
        basis.push_back(embed(inc, e));
      }
  }
  return make_subalgebra(basis);
}

// ---------------------------------------------------------------------------
// Generated subalgebra
// ---------------------------------------------------------------------------

GeneratedAlgebra generated_algebra(const Tuple& x, double tol) {
  const AlgebraPtr alg = x.algebra();
  const int D = alg->dim();
  // Orthonormal columns in L2 coordinates.
  Eigen::MatrixXcd Q(D, 0);
  auto add_if_new = [&](const Element& e) -> bool {
    Eigen::VectorXcd v = l2_vec(e);
    double scale = std::max(1.0, v.norm());
    // Two rounds of classical Gram-Schmidt guard against cancellation.
    for (int round = 0; round < 2; ++round)
      if (Q.cols() > 0) v -= Q * (Q.adjoint() * v).eval();
    if (v.norm() <= tol * scale) return false;
    v.normalize();
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = v;
    return true;
  };

  add_if_new(Element::identity(alg));
  for (int k = 0; k < x.arity(); ++k) {
    add_if_new(x[k]);
    add_if_new(x[k].adjoint());
  }

  // Close the span under products; terminates since dim <= D.
  bool grew = true;
  while (grew && Q.cols() < D) {
    grew = false;
    const int m = static_cast<int>(Q.cols());
    std::vector<Element> basis;
    basis.reserve(m);
    for (int i = 0; i < m; ++i) basis.push_back(l2_unvec(alg, Q.col(i)));
    for (int i = 0; i < m && Q.cols() < D; ++i)
      for (int j = 0; j < m && Q.cols() < D; ++j)
        if (add_if_new(basis[i] * basis[j])) grew = true;
  }

  GeneratedAlgebra g;
  g.dim = static_cast<int>(Q.cols());
  for (int i = 0; i < Q.cols(); ++i) g.onb.push_back(l2_unvec(alg, Q.col(i)));
  return g;
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

namespace {
std::uint64_t fnv1a(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xff;
    h *= 1099511628211ull;
  }
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

Rng::Rng(std::uint64_t seed, std::string_view tag)
    : engine_(fnv1a(seed, tag)) {}

double Rng::uniform() {
  // 53 random bits -> [0,1) double, identical on every platform.
  return double(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Cx Rng::gaussian_cx() {
  // Standard complex Gaussian: E|z|^2 = 1.
  return Cx(gaussian(), gaussian()) / std::sqrt(2.0);
}

int Rng::uniform_int(int lo, int hi) {
  // Rejection-free modulo is fine at our scales (range << 2^64).
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

Element random_element(const AlgebraPtr& alg, Rng& rng) {
  Element x(alg);
  for (int j = 0; j < alg->num_blocks(); ++j)
    for (int r = 0; r < alg->block_dim(j); ++r)
      for (int c = 0; c < alg->block_dim(j); ++c)
        x.block(j)(r, c) = rng.gaussian_cx();
  return x;
}

Element random_selfadjoint(const AlgebraPtr& alg, Rng& rng) {
  Element x = random_element(alg, rng);
  for (int j = 0; j < alg->num_blocks(); ++j)
    x.block(j) = 0.5 * (x.block(j) + x.block(j).adjoint().eval());
  return x;
}

Element random_unitary(const AlgebraPtr& alg, Rng& rng) {
  Element u(alg);
  for (int j = 0; j < alg->num_blocks(); ++j) {
    int n = alg->block_dim(j);
    Mat g(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) g(r, c) = rng.gaussian_cx();
    // QR of a Ginibre matrix with the phase fix Q <- Q diag(R_ii/|R_ii|)
    // yields Haar measure on U(n).
    Eigen::HouseholderQR<Mat> qr(g);
    Mat Q = qr.householderQ();
    Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
      Cx d = R(i, i);
      Cx phase = std::abs(d) > 0 ? d / std::abs(d) : Cx(1, 0);
      Q.col(i) *= phase;
    }
    u.block(j) = Q;
  }
  return u;
}

Tuple random_tuple(const AlgebraPtr& alg, int arity, Rng& rng) {
  std::vector<Element> es;
  es.reserve(arity);
  for (int k = 0; k < arity; ++k) es.push_back(random_element(alg, rng));
  return Tuple(std::move(es));
}

Tuple random_selfadjoint_tuple(const AlgebraPtr& alg, int arity, Rng& rng) {
  std::vector<Element> es;
  es.reserve(arity);
  for (int k = 0; k < arity; ++k) es.push_back(random_selfadjoint(alg, rng));
  return Tuple(std::move(es));
}

Tuple random_tuple_in_ball(const AlgebraPtr& alg, const BallSpec& ball,
                           Rng& rng) {
  std::vector<Element> es;
  es.reserve(ball.arity());
  for (int k = 0; k < ball.arity(); ++k) {
    Element g = random_element(alg, rng);
    double shrink = rng.uniform();
    es.push_back(project_ball(g, ball.radii[k]) * Cx(shrink, 0));
  }
  return Tuple(std::move(es));
}

Tuple random_selfadjoint_tuple_in_ball(const AlgebraPtr& alg,
                                       const BallSpec& ball, Rng& rng) {
  std::vector<Element> es;
  es.reserve(ball.arity());
  for (int k = 0; k < ball.arity(); ++k) {
    Element g = random_selfadjoint(alg, rng);
    double shrink = rng.uniform();
    // Eigenvalue clipping keeps self-adjointness; the extra shrink spreads
    // samples over the interior.
    es.push_back(project_ball(g, ball.radii[k]) * Cx(shrink, 0));
  }
  return Tuple(std::move(es));
}

}  // namespace tracelab
