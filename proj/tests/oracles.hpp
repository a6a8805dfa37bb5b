// Test-side oracles, written independently of the library implementation.
// Each oracle recomputes a quantity from first principles (entry loops,
// power iteration, dense search, exact rational sums) so that library
// results can be checked against a second route.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "tracelab/algebra.hpp"

namespace oracles {

using tracelab::AlgebraPtr;
using tracelab::Cx;
using tracelab::Element;
using tracelab::Mat;
using tracelab::Rational;
using tracelab::Tuple;

// tau(x* y) recomputed with explicit entry loops: sum over blocks of
// beta_j / n_j * sum_{r,c} conj(x[r][c]) y[r][c].
inline Cx inner_entrywise(const Element& x, const Element& y) {
  Cx acc(0, 0);
  const auto& alg = *x.algebra();
  for (int j = 0; j < alg.num_blocks(); ++j) {
    const int n = alg.block_dim(j);
    Cx blk(0, 0);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        blk += std::conj(x.block(j)(r, c)) * y.block(j)(r, c);
    acc += alg.weight_d(j) / double(n) * blk;
  }
  return acc;
}

// Largest singular value over blocks via power iteration on x* x.
inline double op_norm_power(const Element& x, int iters = 500) {
  double best = 0.0;
  for (int j = 0; j < x.num_blocks(); ++j) {
    const Mat& m = x.block(j);
    Mat g = m.adjoint() * m;
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(g.rows());
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
      Eigen::VectorXcd w = g * v;
      lam = w.norm();
      if (lam == 0.0) break;
      v = w / lam;
    }
    best = std::max(best, std::sqrt(lam));
  }
  return best;
}

// Projection onto the span of a (not necessarily orthonormal) basis via the
// Gram-matrix normal equations, solved with a pseudoinverse.
inline Element gram_project(const std::vector<Element>& basis,
                            const Element& z) {
  const int m = static_cast<int>(basis.size());
  Eigen::MatrixXcd G(m, m);
  Eigen::VectorXcd b(m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k)
      G(i, k) = inner_entrywise(basis[i], basis[k]);
    b(i) = inner_entrywise(basis[i], z);
  }
  Eigen::VectorXcd coef =
      G.completeOrthogonalDecomposition().pseudoInverse() * b;
  Element p(z.algebra());
  for (int i = 0; i < m; ++i) p += coef(i) * basis[i];
  return p;
}

// Exact rational trace of an element whose entries are (small) integers,
// as produced by integer-valued test matrices.  diag entries are read off
// the real parts, which must be integral.
inline Rational trace_exact_integer(const Element& x) {
  Rational acc(0);
  const auto& alg = *x.algebra();
  for (int j = 0; j < alg.num_blocks(); ++j) {
    long long d = 0;
    for (int r = 0; r < alg.block_dim(j); ++r)
      d += llround(x.block(j)(r, r).real());
    acc += alg.weight(j) * Rational(d, alg.block_dim(j));
  }
  return acc;
}

// Dimension of the *-algebra generated by a tuple, computed as the rank of
// the Gram matrix of all words of length <= maxlen in {1, x_k, x_k*}.
// Independent of the library's incremental span-closure.
inline int generated_dim_words(const Tuple& x, int maxlen,
                               double tol = 1e-9) {
  std::vector<Element> words;
  words.push_back(Element::identity(x.algebra()));
  std::vector<Element> letters;
  for (int k = 0; k < x.arity(); ++k) {
    letters.push_back(x[k]);
    letters.push_back(x[k].adjoint());
  }
  std::vector<Element> frontier = words;
  for (int len = 1; len <= maxlen; ++len) {
    std::vector<Element> next;
    for (const Element& w : frontier)
      for (const Element& l : letters) next.push_back(w * l);
    words.insert(words.end(), next.begin(), next.end());
    frontier = std::move(next);
    if (words.size() > 4000) break;  // plenty at these dimensions
  }
  const int m = static_cast<int>(words.size());
  Eigen::MatrixXcd G(m, m);
  for (int i = 0; i < m; ++i)
    for (int k = i; k < m; ++k) {
      G(i, k) = inner_entrywise(words[i], words[k]);
      G(k, i) = std::conj(G(i, k));
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
  double top = es.eigenvalues().cwiseAbs().maxCoeff();
  int rank = 0;
  for (int i = 0; i < m; ++i)
    if (es.eigenvalues()(i) > tol * std::max(1.0, top)) ++rank;
  return rank;
}

// Transport cost between two single self-adjoint matrices: with spectra
// sorted ascending, the aligned pairing maximizes the normalized trace
// pairing, giving (1/n) sum_i lambda_i mu_i.
inline double sorted_eigenvalue_pairing(const Mat& X, const Mat& Y) {
  Eigen::SelfAdjointEigenSolver<Mat> ex(X), ey(Y);
  Eigen::VectorXd lx = ex.eigenvalues(), ly = ey.eigenvalues();
  std::sort(lx.data(), lx.data() + lx.size());
  std::sort(ly.data(), ly.data() + ly.size());
  return lx.dot(ly) / double(lx.size());
}

// Central-difference L2 gradient of a scalar function on tuples, computed in
// the real orthonormal coordinates of the vectorization.  Independent of any
// analytic derivative formulas.
template <typename F>
inline Tuple fd_gradient(const F& f, const Tuple& x, double h) {
  const Eigen::VectorXd v = tracelab::l2_rvec(x);
  Eigen::VectorXd g(v.size());
  for (int i = 0; i < v.size(); ++i) {
    Eigen::VectorXd vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    const double fp = f(tracelab::l2_runvec(x.algebra(), x.arity(), vp));
    const double fm = f(tracelab::l2_runvec(x.algebra(), x.arity(), vm));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return tracelab::l2_runvec(x.algebra(), x.arity(), g);
}

// Weighted nuclear norm sum_j beta_j/n_j * (sum of singular values of the
// j-th block): the support function of the unit operator-norm ball in the
// L2 pairing, computed directly from SVDs.
inline double weighted_nuclear(const Element& a) {
  const auto& alg = *a.algebra();
  double s = 0.0;
  for (int j = 0; j < alg.num_blocks(); ++j) {
    Eigen::JacobiSVD<Mat> svd(a.block(j));
    s += alg.weight_d(j) * svd.singularValues().sum() / double(alg.block_dim(j));
  }
  return s;
}

// Brute-force maximum over all n! permutation alignments for tuples of
// diagonal matrices; exact supremum over the whole unitary orbit in that
// case (the cost is linear over the Birkhoff polytope).
inline double permutation_pairing_max(const std::vector<Eigen::VectorXcd>& xs,
                                      const std::vector<Eigen::VectorXcd>& ys) {
  const int n = static_cast<int>(xs[0].size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double v = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k)
      for (int i = 0; i < n; ++i)
        v += (std::conj(xs[k](i)) * ys[k](perm[i])).real();
    best = std::max(best, v / double(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracles
