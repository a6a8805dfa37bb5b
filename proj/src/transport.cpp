#include "tracelab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace tracelab {

namespace {

constexpr int kMaxOracleDim = 8;

void require_single_factor(const Tuple& t) {
  const TracialAlgebra& alg = *t.algebra();
  if (alg.num_blocks() != 1 || alg.weight(0) != Rational(1))
    throw Error(Errc::invariant,
                "orbit types need a single matrix factor with weight 1");
}

// f(u) = (1/n) Re sum_k tr(X_k* u Y_k u*).
double orbit_cost_at(const std::vector<Mat>& X, const std::vector<Mat>& Y,
                     const Mat& u) {
  const double n = static_cast<double>(u.rows());
  Cx acc(0, 0);
  for (std::size_t k = 0; k < X.size(); ++k)
    acc += (X[k].adjoint() * u * Y[k] * u.adjoint()).trace();
  return acc.real() / n;
}

// Euclidean gradient of f with respect to Re tr(A* B):
//   G = (1/n) sum_k (X_k u Y_k* + X_k* u Y_k).
Mat euclidean_grad(const std::vector<Mat>& X, const std::vector<Mat>& Y,
                   const Mat& u) {
  const double n = static_cast<double>(u.rows());
  Mat g = Mat::Zero(u.rows(), u.cols());
  for (std::size_t k = 0; k < X.size(); ++k)
    g += X[k] * u * Y[k].adjoint() + X[k].adjoint() * u * Y[k];
  return g / n;
}

struct AscentOutcome {
  double value;
  Mat u;
  bool converged;
  int iters;
};

// Orthonormal real basis of the skew-Hermitian n x n matrices under
// <B, C> = Re tr(B* C): the diagonal i e_aa, and for a < b the pairs
// (e_ab - e_ba)/sqrt(2) and i (e_ab + e_ba)/sqrt(2).  Real dimension n^2.
std::vector<Mat> skew_basis(int n) {
  std::vector<Mat> basis;
  basis.reserve(static_cast<std::size_t>(n) * n);
  const double s = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < n; ++a) {
    Mat d = Mat::Zero(n, n);
    d(a, a) = Cx(0, 1);
    basis.push_back(std::move(d));
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      Mat r = Mat::Zero(n, n);
      r(a, b) = Cx(s, 0);
      r(b, a) = Cx(-s, 0);
      basis.push_back(std::move(r));
      Mat m = Mat::Zero(n, n);
      m(a, b) = Cx(0, s);
      m(b, a) = Cx(0, s);
      basis.push_back(std::move(m));
    }
  return basis;
}

// exp(B) for skew-Hermitian B via the spectral theorem on -iB.
Mat exp_skew(const Mat& B) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(Cx(0, -1) * B));
  Eigen::VectorXcd phases =
      (Cx(0, 1) * es.eigenvalues().cast<Cx>().array()).exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// One Newton step for the stationarity equation A(u) = 0 in the exponential
// chart u <- exp(B) u.  Curves t -> exp(tB) u are geodesics of the
// bi-invariant metric, so with W_k = u Y_k u*, P = (1/n) sum_k W_k X_k*, and
// Q = (1/n) sum_k X_k* W_k the exact Hessian bilinear form is
//   h(B, C) = Re[ tr((BC + CB)(P + Q))/2
//                 - (1/n) sum_k (tr(B X_k* C W_k) + tr(C X_k* B W_k)) ]
// and the gradient is skew(Q - P) = A/2.  The linear system is solved by a
// spectral pseudo-inverse (flat directions such as the global phase are
// dropped), and the step is accepted only if it strictly shrinks ||A||_F —
// a criterion immune to f saturating in double precision near the optimum.
bool newton_step(const std::vector<Mat>& X, const std::vector<Mat>& Y, Mat& u,
                 Mat& A, double& a2) {
  const int n = static_cast<int>(u.rows());
  const double nn = static_cast<double>(n);
  std::vector<Mat> W(X.size());
  Mat P = Mat::Zero(n, n), Q = Mat::Zero(n, n);
  for (std::size_t k = 0; k < X.size(); ++k) {
    W[k] = u * Y[k] * u.adjoint();
    P += W[k] * X[k].adjoint() / nn;
    Q += X[k].adjoint() * W[k] / nn;
  }
  const Mat M = P + Q;

  const std::vector<Mat> basis = skew_basis(n);
  const int dim = static_cast<int>(basis.size());
  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd grad(dim);
  for (int i = 0; i < dim; ++i)
    grad(i) = 0.5 * (basis[i].adjoint() * A).trace().real();
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      const Mat& B = basis[i];
      const Mat& C = basis[j];
      Cx t = 0.5 * ((B * C + C * B) * M).trace();
      for (std::size_t k = 0; k < X.size(); ++k)
        t -= ((B * X[k].adjoint() * C + C * X[k].adjoint() * B) * W[k])
                 .trace() /
             nn;
      hess(i, j) = hess(j, i) = t.real();
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  if (!(lmax > 0)) return false;
  // Polish only inside the basin of a maximum: a clearly convex direction
  // marks a saddle, where Newton would converge to the wrong stationary
  // point; plain ascent escapes instead.  The threshold must tolerate the
  // stabilizer of the maximizer (diagonal phases in the aligned eigenbasis),
  // which contributes exactly flat directions whose measured curvature
  // carries an arbitrary sign of size well above roundoff near — but not
  // at — the optimum.
  if (lam(dim - 1) > 1e-4 * lmax) return false;
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * grad;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(dim);
  // Invert the strictly concave directions only; flat and slightly convex
  // ones stay with the globalizing ascent so they can never blow the step.
  for (int d = 0; d < dim; ++d)
    if (lam(d) < -1e-10 * lmax) coef(d) = -proj(d) / lam(d);
  const Eigen::VectorXd step = es.eigenvectors() * coef;

  Mat dir = Mat::Zero(n, n);
  for (int i = 0; i < dim; ++i) dir += step(i) * basis[i];

  double scale = 1.0;
  for (int half = 0; half < 25; ++half) {
    Mat utrial = exp_skew(Mat(scale * dir)) * u;
    Mat gt = euclidean_grad(X, Y, utrial);
    Mat at = gt * utrial.adjoint() - utrial * gt.adjoint();
    const double a2t = at.squaredNorm();
    if (a2t < 0.81 * a2) {  // ||A_new|| <= 0.9 ||A||
      u = std::move(utrial);
      A = std::move(at);
      a2 = a2t;
      return true;
    }
    scale *= 0.5;
  }
  return false;
}

// Riemannian gradient ascent on U(n) with the Cayley retraction
//   u(alpha) = (I - alpha/2 A)^{-1} (I + alpha/2 A) u,
// where A = G u* - u G* is skew-Hermitian; the derivative of f along the
// curve at alpha = 0 equals ||A||_F^2 / 2 >= 0.  Monotone Armijo steps
// globalize; once the gradient is small relative to the data scale, Newton
// polish drives ||A||_F below grad_tol (the Armijo test alone stalls when
// the remaining increase of f falls under the resolution of doubles).
AscentOutcome ascend(const std::vector<Mat>& X, const std::vector<Mat>& Y,
                     Mat u, const CostOptions& opt) {
  const int n = static_cast<int>(u.rows());
  const Mat id = Mat::Identity(n, n);
  constexpr double kArmijo = 1e-4;

  double xs = 0.0, ys = 0.0;
  for (const Mat& m : X) xs += m.squaredNorm();
  for (const Mat& m : Y) ys += m.squaredNorm();
  const double polish_at = 0.1 * (1.0 + std::sqrt(xs * ys));

  double f = orbit_cost_at(X, Y, u);
  Mat G = euclidean_grad(X, Y, u);
  Mat A = G * u.adjoint() - u * G.adjoint();
  double a2 = A.squaredNorm();
  double alpha = 1.0;

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    if (std::sqrt(a2) <= opt.grad_tol) return {f, std::move(u), true, it};

    if (std::sqrt(a2) <= polish_at && newton_step(X, Y, u, A, a2)) {
      f = orbit_cost_at(X, Y, u);
      continue;
    }

    alpha = std::min(alpha * 2.0, 1e6);
    bool stepped = false;
    for (int half = 0; half < 60; ++half) {
      Mat unew = (id - 0.5 * alpha * A).partialPivLu().solve(
          (id + 0.5 * alpha * A) * u);
      const double fnew = orbit_cost_at(X, Y, unew);
      if (fnew >= f + kArmijo * alpha * 0.5 * a2) {
        u = std::move(unew);
        f = fnew;
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) return {f, std::move(u), std::sqrt(a2) <= opt.grad_tol, it};
    G = euclidean_grad(X, Y, u);
    A = G * u.adjoint() - u * G.adjoint();
    a2 = A.squaredNorm();
  }
  return {f, std::move(u), std::sqrt(a2) <= opt.grad_tol, it};
}

}  // namespace

OrbitType make_orbit_type(Tuple rep) {
  require_single_factor(rep);
  return OrbitType{std::move(rep)};
}

CostResult cost_orbit(const OrbitType& X, const OrbitType& Y,
                      const CostOptions& opt) {
  require_single_factor(X.rep);
  require_single_factor(Y.rep);
  if (X.rep.arity() != Y.rep.arity())
    throw Error(Errc::invariant, "orbit types have different arities");
  const int n = X.rep.algebra()->block_dim(0);
  if (Y.rep.algebra()->block_dim(0) != n)
    throw Error(Errc::invariant, "orbit types have different matrix sizes");
  if (opt.restarts < 1)
    throw Error(Errc::invariant, "need at least one restart");

  std::vector<Mat> xm, ym;
  for (int k = 0; k < X.rep.arity(); ++k) xm.push_back(X.rep[k].block(0));
  for (int k = 0; k < Y.rep.arity(); ++k) ym.push_back(Y.rep[k].block(0));

  const AlgebraPtr mn = matrix_algebra(n);
  Rng rng(opt.seed, "transport-restarts");

  CostResult best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < opt.restarts; ++s) {
    Mat u0 = s == 0 ? Mat(Mat::Identity(n, n))
                    : random_unitary(mn, rng).block(0);
    AscentOutcome out = ascend(xm, ym, std::move(u0), opt);
    // Deterministic merge: the earliest restart reaching the best value wins;
    // improvements below float-noise size never displace it, so an exactly
    // stationary start (the identity on a self-pair) stays selected.
    const double margin = std::isfinite(best.value)
                              ? 1e-12 * (1.0 + std::abs(best.value))
                              : 0.0;
    if (out.value > best.value + margin) {
      best.value = out.value;
      best.converged = out.converged;
      best.best_restart = s;
      best.iters = out.iters;
      best.aligner = Element(mn, {out.u});
    }
  }
  return best;
}

WassersteinResult wasserstein(const OrbitType& X, const OrbitType& Y,
                              const CostOptions& opt) {
  WassersteinResult w;
  w.cost = cost_orbit(X, Y, opt);
  const double nx = l2_norm(X.rep), ny = l2_norm(Y.rep);
  w.d2_raw = nx * nx + ny * ny - 2.0 * w.cost.value;
  w.clamped = w.d2_raw < 0.0;
  w.d = std::sqrt(std::max(0.0, w.d2_raw));
  const Element& u = w.cost.aligner;
  std::vector<Element> aligned;
  for (int k = 0; k < Y.rep.arity(); ++k)
    aligned.push_back(u * Y.rep[k] * u.adjoint());
  w.y_aligned = Tuple(std::move(aligned));
  return w;
}

double assignment_cost(const Element& X, const Element& Y) {
  if (X.algebra()->num_blocks() != 1 || Y.algebra()->num_blocks() != 1)
    throw Error(Errc::invariant, "assignment oracle needs single factors");
  const int n = X.algebra()->block_dim(0);
  if (n != Y.algebra()->block_dim(0) || n > kMaxOracleDim)
    throw Error(Errc::invariant, "assignment oracle needs equal sizes <= 8");
  if (!is_selfadjoint(X) || !is_selfadjoint(Y))
    throw Error(Errc::invariant, "assignment oracle needs self-adjoint inputs");
  Eigen::SelfAdjointEigenSolver<Mat> ex(X.block(0)), ey(Y.block(0));
  Eigen::VectorXd lx = ex.eigenvalues(), ly = ey.eigenvalues();
  std::sort(lx.data(), lx.data() + n);
  std::sort(ly.data(), ly.data() + n);
  return lx.dot(ly) / static_cast<double>(n);
}

double permutation_cost(const Tuple& X, const Tuple& Y) {
  require_single_factor(X);
  require_single_factor(Y);
  if (X.arity() != Y.arity())
    throw Error(Errc::invariant, "permutation oracle arity mismatch");
  const int n = X.algebra()->block_dim(0);
  if (n != Y.algebra()->block_dim(0) || n > kMaxOracleDim)
    throw Error(Errc::invariant, "permutation oracle needs equal sizes <= 8");
  for (int k = 0; k < X.arity(); ++k) {
    auto offdiag = [](const Mat& m) {
      Mat d = m;
      d.diagonal().setZero();
      return d.norm();
    };
    if (offdiag(X[k].block(0)) > 1e-12 || offdiag(Y[k].block(0)) > 1e-12)
      throw Error(Errc::invariant, "permutation oracle needs diagonal tuples");
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double v = 0.0;
    for (int k = 0; k < X.arity(); ++k)
      for (int i = 0; i < n; ++i)
        v += (std::conj(X[k].block(0)(i, i)) * Y[k].block(0)(perm[i], perm[i]))
                 .real();
    best = std::max(best, v / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace tracelab
