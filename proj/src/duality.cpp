#include "tracelab/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace tracelab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Largest block dimension for which permutation alignments are enumerated.
constexpr int kMaxPermDim = 8;

double re_inner(const Tuple& x, const Tuple& y) {
  return std::real(l2_inner(x, y));
}

void require_compatible(const Tuple& a, const Tuple& b, const char* where) {
  if (!a.algebra() || !b.algebra() ||
      !a.algebra()->same_structure(*b.algebra()) || a.arity() != b.arity()) {
    throw Error(Errc::bad_input,
                std::string(where) + ": incompatible tuple shapes");
  }
}

// tau(|a|): weighted nuclear norm, the support function of the unit
// operator-norm ball in the L2 pairing.
double nuclear(const Element& a) {
  const auto& alg = *a.algebra();
  double s = 0.0;
  for (int j = 0; j < alg.num_blocks(); ++j) {
    Eigen::JacobiSVD<Mat> svd(a.block(j));
    s += alg.weight_d(j) * svd.singularValues().sum() /
         static_cast<double>(alg.block_dim(j));
  }
  return s;
}

Mat polar_of(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// argmax_{y in D_r} Re<m, y>: per entry and block, radius times the polar
// factor of the matching block of m.
Tuple polar_candidate(const Tuple& m, const BallSpec& r) {
  Tuple y = m;
  for (int k = 0; k < m.arity(); ++k)
    for (int j = 0; j < m[k].num_blocks(); ++j)
      y[k].block(j) = r.radii[k] * polar_of(m[k].block(j));
  return y;
}

// Euclidean projection onto the probability simplex (sort-based).
Eigen::VectorXd simplex_project(Eigen::VectorXd v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / (i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  for (int i = 0; i < n; ++i) v[i] = std::max(v[i] - theta, 0.0);
  return v;
}

// Joint eigenframe of a commuting self-adjoint tuple in a single factor:
// diagonalizes a random linear combination and verifies that every entry is
// diagonal in that frame.  Returns false for non-commuting or non-Hermitian
// tuples.
bool joint_frame(const Tuple& t, Mat* frame, Eigen::MatrixXd* eigs) {
  if (!t.algebra() || t.arity() == 0) return false;
  const auto& alg = *t.algebra();
  if (alg.num_blocks() != 1) return false;
  const int n = alg.block_dim(0);
  double scale = 1.0;
  for (int k = 0; k < t.arity(); ++k) {
    if (!is_selfadjoint(t[k], 1e-9)) return false;
    scale = std::max(scale, op_norm(t[k]));
  }
  Rng rng(0xF1E1D1, "joint-frame");
  for (int attempt = 0; attempt < 3; ++attempt) {
    Mat combo = Mat::Zero(n, n);
    for (int k = 0; k < t.arity(); ++k) {
      const Mat h = 0.5 * (t[k].block(0) + t[k].block(0).adjoint());
      combo += rng.gaussian() * h;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(combo);
    const Mat v = es.eigenvectors();
    Eigen::MatrixXd e(t.arity(), n);
    bool ok = true;
    for (int k = 0; k < t.arity() && ok; ++k) {
      Mat d = v.adjoint() * t[k].block(0) * v;
      e.row(k) = d.diagonal().real();
      d.diagonal().setZero();
      if (d.cwiseAbs().maxCoeff() > 1e-9 * scale) ok = false;
    }
    if (ok) {
      *frame = v;
      *eigs = e;
      return true;
    }
  }
  return false;
}

// Exact maximum of (1/n) sum_i sum_k ex(k,i) ey(k,sigma(i)) over all
// permutations sigma (n <= kMaxPermDim).
double assignment_max(const Eigen::MatrixXd& ex, const Eigen::MatrixXd& ey,
                      std::vector<int>* best_perm) {
  const int n = static_cast<int>(ex.cols());
  const Eigen::MatrixXd cost = ex.transpose() * ey;  // cost(i,j)
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -kInf;
  do {
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += cost(i, perm[i]);
    if (v > best) {
      best = v;
      if (best_perm) *best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

Mat perm_matrix(const std::vector<int>& sigma) {
  const int n = static_cast<int>(sigma.size());
  Mat p = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) p(sigma[j], j) = 1.0;
  return p;
}

Tuple conjugate_tuple(const Mat& u, const Tuple& t) {
  Tuple out = t;
  for (int k = 0; k < t.arity(); ++k)
    out[k].block(0) = u * t[k].block(0) * u.adjoint();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// DualPair
// ---------------------------------------------------------------------------

DualPair build_dual_pair(const OrbitType& X, const BallSpec& r,
                         const DualPairOptions& opt) {
  const Tuple& rep = make_orbit_type(X.rep).rep;  // re-validate the type
  if (r.arity() != rep.arity())
    throw Error(Errc::bad_input, "build_dual_pair: ball arity mismatch");
  if (!in_ball(rep, r, 1e-12))
    throw Error(Errc::bad_input, "build_dual_pair: base tuple outside ball");
  DualPair pair;
  pair.x_ = rep;
  pair.r_ = r;
  pair.opt_ = opt;
  pair.slopes_.push_back(rep);  // identity conjugate first
  Rng slope_rng(opt.seed, "dual-slopes");
  for (int p = 0; p < opt.orbit_probes; ++p) {
    const Element u = random_unitary(rep.algebra(), slope_rng);
    std::vector<Element> entries;
    entries.reserve(rep.arity());
    for (int k = 0; k < rep.arity(); ++k)
      entries.push_back(u * rep[k] * u.adjoint());
    pair.slopes_.push_back(Tuple(std::move(entries)));
  }
  Rng cand_rng(opt.seed, "dual-candidates");
  for (int p = 0; p < opt.random_candidates; ++p)
    pair.random_candidates_.push_back(
        random_tuple_in_ball(rep.algebra(), r, cand_rng));
  pair.commuting_ = joint_frame(rep, &pair.frame_, &pair.eigs_);
  return pair;
}

double DualPair::slope_max(const Tuple& y) const {
  double best = -kInf;
  for (const Tuple& a : slopes_) best = std::max(best, re_inner(a, y));
  return best;
}

OrbitSup DualPair::psi0_sup(const Tuple& y) const {
  require_compatible(x_, y, "psi0");
  OrbitSup out;
  out.value = -kInf;
  for (const Tuple& a : slopes_) {
    const double v = re_inner(a, y);
    if (v > out.value) {
      out.value = v;
      out.slope = a;
    }
  }
  // Exact alignment for commuting pairs: enumerate permutations of the
  // joint eigenframes.  For such pairs the cost is linear over the doubly
  // stochastic matrix (|u_ij|^2), so the permutation maximum is the true
  // orbit supremum.
  const int n = x_.algebra()->block_dim(0);
  if (commuting_ && n <= kMaxPermDim) {
    Mat vy;
    Eigen::MatrixXd ey;
    if (joint_frame(y, &vy, &ey)) {
      std::vector<int> sigma;
      const double v = assignment_max(eigs_, ey, &sigma);
      out.exact = true;
      if (v > out.value) {
        const Mat u = vy * perm_matrix(sigma) * frame_.adjoint();
        out.value = v;
        out.slope = conjugate_tuple(u, x_);
      }
      return out;
    }
  }
  if (opt_.optimized_sup) {
    const CostResult cr = cost_orbit(OrbitType{x_}, OrbitType{y}, opt_.cost);
    out.converged = cr.converged;
    if (cr.value > out.value) {
      // C = Re<X, u y u*> = Re<u* X u, y>, so u* X u is the active slope.
      const Mat u = cr.aligner.block(0);
      out.value = cr.value;
      out.slope = conjugate_tuple(u.adjoint().eval(), x_);
    }
  }
  return out;
}

SupportValue DualPair::phi0_sup(
    const Tuple& x, const std::vector<Tuple>& extra_candidates) const {
  require_compatible(x_, x, "phi0");
  std::vector<Tuple> cands;
  cands.push_back(project_ball(x, r_));
  for (const Tuple& a : slopes_) cands.push_back(polar_candidate(x - a, r_));

  // Dual simplex descent on h(lambda) = sum_k r_k tau|x_k - (A lambda)_k|,
  // whose minimum equals the Legendre supremum of the slope minorant; the
  // polar factors along the way are near-optimal witnesses.  Used purely as
  // a candidate generator: certification comes from the exact evaluations
  // below, not from convergence here.
  const int S = static_cast<int>(slopes_.size());
  if (S >= 2 && opt_.dual_iters > 0) {
    Eigen::VectorXd lam = Eigen::VectorXd::Constant(S, 1.0 / S);
    double hbest = kInf;
    Eigen::VectorXd lam_best = lam;
    for (int it = 0; it < opt_.dual_iters; ++it) {
      Tuple m = x;
      for (int s = 0; s < S; ++s) m -= lam[s] * slopes_[s];
      double h = 0.0;
      Tuple w = m;  // polar factors, reused for candidates and subgradient
      for (int k = 0; k < m.arity(); ++k) {
        h += r_.radii[k] * nuclear(m[k]);
        for (int j = 0; j < m[k].num_blocks(); ++j)
          w[k].block(j) = polar_of(m[k].block(j));
      }
      if (h < hbest) {
        hbest = h;
        lam_best = lam;
      }
      if (it % std::max(1, opt_.polar_every) == 0) {
        Tuple y = w;
        for (int k = 0; k < y.arity(); ++k) y[k] *= Cx(r_.radii[k], 0.0);
        cands.push_back(std::move(y));
      }
      Eigen::VectorXd g(S);
      for (int s = 0; s < S; ++s) {
        double gs = 0.0;
        for (int k = 0; k < m.arity(); ++k)
          gs -= r_.radii[k] * std::real(l2_inner(w[k], slopes_[s][k]));
        g[s] = gs;
      }
      const double step = 0.5 / std::sqrt(it + 1.0);
      lam = simplex_project(lam - step * g / (g.norm() + 1e-12));
    }
    Tuple m = x;
    for (int s = 0; s < S; ++s) m -= lam_best[s] * slopes_[s];
    cands.push_back(polar_candidate(m, r_));
  }

  for (const Tuple& c : random_candidates_) cands.push_back(c);
  for (const Tuple& c : extra_candidates) {
    require_compatible(x_, c, "phi0 candidate");
    cands.push_back(project_ball(c, r_));
  }

  // y = 0 gives the exact baseline 0: every psi0 candidate vanishes there.
  SupportValue out;
  out.value = 0.0;
  out.witness = Tuple(x_.algebra(), x_.arity());
  for (const Tuple& y : cands) {
    const double gain = re_inner(x, y);
    // The slope minorant never exceeds psi0, so this bound is exact: if it
    // cannot beat the incumbent, the full evaluation cannot either.
    if (gain - slope_max(y) <= out.value) continue;
    const OrbitSup s = psi0_sup(y);
    const double g = gain - s.value;
    if (g > out.value) {
      out.value = g;
      out.witness = y;
      out.converged = s.converged;
    }
  }
  return out;
}

double DualPair::phi2(const Tuple& x) const {
  const double d = dist_to_ball(x, r_);
  return phi0(x) + 0.5 * d * d + 2.0 * r_.l2_radius() * d;
}

double DualPair::psi2(const Tuple& y) const {
  const double d = dist_to_ball(y, r_);
  return psi1(y) + 0.5 * d * d;
}

GlobalPair DualPair::extended() const {
  DualPair p = *this;
  return extend_global([p](const Tuple& x) { return p.phi0(x); },
                       [p](const Tuple& y) { return p.psi1(y); }, r_);
}

double DualPair::psi1_with_context(const Tuple& y, const Tuple& x_hat,
                                   double phi_at_hat) const {
  return std::max(psi0_sup(y).value, re_inner(x_hat, y) - phi_at_hat);
}

double DualPair::on_ball_margin(const Tuple& x, const Tuple& y) const {
  const OrbitSup s = psi0_sup(y);
  const SupportValue p = phi0_sup(x, {y});
  return p.value + s.value - re_inner(x, y);
}

double DualPair::margin(const Tuple& x, const Tuple& y) const {
  const Tuple x_hat = project_ball(x, r_);
  const double dx = dist_to_ball(x, r_);
  const double dy = dist_to_ball(y, r_);
  // The witness of the Legendre solve at the projection is shared: it
  // re-enters the candidate list at x and prices the context slope of psi1,
  // so the two sides cancel coherently and the margin stays nonnegative.
  const SupportValue base = phi0_sup(x_hat, {project_ball(y, r_)});
  const double phix =
      dx > 0.0 ? phi0_sup(x, {base.witness}).value : base.value;
  const double psiy = psi1_with_context(y, x_hat, base.value);
  const double rad = r_.l2_radius();
  return phix + 0.5 * dx * dx + 2.0 * rad * dx + psiy + 0.5 * dy * dy -
         re_inner(x, y);
}

GlobalPair extend_global(std::function<double(const Tuple&)> phi0,
                         std::function<double(const Tuple&)> psi1,
                         const BallSpec& r) {
  const double rad = r.l2_radius();
  GlobalPair g;
  g.phi2 = [phi0 = std::move(phi0), r, rad](const Tuple& x) {
    const double d = dist_to_ball(x, r);
    return phi0(x) + 0.5 * d * d + 2.0 * rad * d;
  };
  g.psi2 = [psi1 = std::move(psi1), r](const Tuple& y) {
    const double d = dist_to_ball(y, r);
    return psi1(y) + 0.5 * d * d;
  };
  return g;
}

// ---------------------------------------------------------------------------
// Couplings and gaps
// ---------------------------------------------------------------------------

Coupling optimal_coupling(const OrbitType& X, const OrbitType& Y,
                          const CostOptions& opt) {
  make_orbit_type(X.rep);  // re-validate both types
  make_orbit_type(Y.rep);
  require_compatible(X.rep, Y.rep, "optimal_coupling");
  const int n = X.rep.algebra()->block_dim(0);
  Mat vx, vy;
  Eigen::MatrixXd ex, ey;
  if (n <= kMaxPermDim && joint_frame(X.rep, &vx, &ex) &&
      joint_frame(Y.rep, &vy, &ey)) {
    std::vector<int> sigma;
    Coupling c;
    c.cost = assignment_max(ex, ey, &sigma);
    // u = V_y P_sigma V_x* maximizes Re<u X u*, Y>; conjugating Y back by
    // u* realizes the same cost against X itself.
    const Mat u = vy * perm_matrix(sigma) * vx.adjoint();
    c.y_aligned = conjugate_tuple(u.adjoint().eval(), Y.rep);
    c.certified = true;
    c.converged = true;
    return c;
  }
  const WassersteinResult w = wasserstein(X, Y, opt);
  Coupling c;
  c.cost = w.cost.value;
  c.y_aligned = w.y_aligned;
  c.certified = false;
  c.converged = w.cost.converged;
  return c;
}

GapResult duality_gap(const OrbitType& X, const OrbitType& Y,
                      const DualPair& pair, const CostOptions& opt) {
  const Coupling c = optimal_coupling(X, Y, opt);
  const Tuple x_hat = project_ball(X.rep, pair.ball());
  const SupportValue p = pair.phi0_sup(x_hat);
  const double psi_y =
      std::max(pair.psi1(c.y_aligned), re_inner(x_hat, c.y_aligned) - p.value);
  GapResult g;
  g.gap = p.value + psi_y - c.cost;
  g.cost = c.cost;
  g.certified = c.certified;
  g.converged = c.converged && p.converged;
  g.y_aligned = c.y_aligned;
  return g;
}

GapResult duality_gap(const OrbitType& X, const OrbitType& Y,
                      const std::function<double(const Tuple&)>& phi,
                      const std::function<double(const Tuple&)>& psi,
                      const CostOptions& opt) {
  const Coupling c = optimal_coupling(X, Y, opt);
  GapResult g;
  g.gap = phi(X.rep) + psi(c.y_aligned) - c.cost;
  g.cost = c.cost;
  g.certified = c.certified;
  g.converged = c.converged;
  g.y_aligned = c.y_aligned;
  return g;
}

// ---------------------------------------------------------------------------
// Displacement interpolation
// ---------------------------------------------------------------------------

InterpolationReport displacement_interpolation_check(const Tuple& x,
                                                     const Tuple& y_aligned,
                                                     double t,
                                                     double rank_tol) {
  require_compatible(x, y_aligned, "displacement_interpolation_check");
  if (!(t > 0.0 && t < 1.0))
    throw Error(Errc::bad_input,
                "displacement_interpolation_check: t must lie in (0,1)");
  InterpolationReport rep;
  rep.t = t;
  const Tuple mid = (1.0 - t) * x + t * y_aligned;
  rep.dim_mid = generated_algebra(mid, rank_tol).dim;
  rep.dim_joint = generated_algebra(Tuple::concat(x, y_aligned), rank_tol).dim;
  if (rep.dim_mid > rep.dim_joint)
    throw Error(Errc::invariant,
                "displacement midpoint left the joint algebra");
  rep.equal = rep.dim_mid == rep.dim_joint;
  rep.flagged = rep.dim_mid < rep.dim_joint;
  return rep;
}

// ---------------------------------------------------------------------------
// Definable realization
// ---------------------------------------------------------------------------

RealizationReport definable_realization_demo(const Tuple& a, const Element& z,
                                             const RealizationParams& par) {
  if (!a.algebra() || !z.algebra() ||
      !a.algebra()->same_structure(*z.algebra()))
    throw Error(Errc::bad_input, "realization: tuple/element mismatch");
  if (!(par.t > 0.0) || !(par.r > 0.0))
    throw Error(Errc::bad_input, "realization: t and r must be positive");
  if (!(par.t * op_norm(z) < 0.5 * par.r))
    throw Error(Errc::bad_input,
                "realization: need t * op_norm(z) < r / 2");
  const GeneratedAlgebra w = generated_algebra(a);
  if (span_residual(w.onb, z) > 1e-7 * (1.0 + l2_norm(z)))
    throw Error(Errc::bad_input,
                "realization: element lies outside the generated algebra");

  const Predicate phi = Predicate::inner_re(Tuple(std::vector<Element>{z}));
  RegularizationParams reg;
  reg.t = par.t;
  reg.outer = BallSpec::uniform(1, par.r);
  reg.inner = BallSpec::uniform(1, 2.0 * par.r);
  const Envelope env = lasry_lions(phi, reg, par.opt);
  const EnvGradResult g =
      envelope_gradient(env, Tuple(z.algebra(), 1));

  RealizationReport rep;
  rep.value = g.value;
  rep.converged = g.converged;
  rep.grad = g.grad[0];
  rep.err = l2_dist(g.grad, Tuple(std::vector<Element>{z}));
  rep.pass = rep.converged && rep.err <= kRealizationTol;
  return rep;
}

// ---------------------------------------------------------------------------
// Monotonicity under conditional expectation
// ---------------------------------------------------------------------------

ExpectationReport expectation_inequality_check(
    const Subalgebra& A, const std::vector<AffinePiece>& pieces, int arity,
    int samples, std::uint64_t seed, double tol) {
  if (!A.ambient || A.onb.empty())
    throw Error(Errc::bad_input, "expectation check: empty subalgebra");
  if (arity < 1 || pieces.empty())
    throw Error(Errc::bad_input, "expectation check: need pieces and arity");
  for (const AffinePiece& p : pieces) {
    if (!p.slope.algebra() ||
        !p.slope.algebra()->same_structure(*A.ambient) ||
        p.slope.arity() != arity)
      throw Error(Errc::bad_input, "expectation check: slope shape mismatch");
    for (int k = 0; k < arity; ++k) {
      const Element d = conditional_expectation(A, p.slope[k]) - p.slope[k];
      if (l2_norm(d) > 1e-9 * (1.0 + l2_norm(p.slope[k])))
        throw Error(Errc::bad_input,
                    "expectation check: slope entry outside the subalgebra");
    }
  }
  const auto value = [&](const Tuple& x) {
    double best = -kInf;
    for (const AffinePiece& p : pieces)
      best = std::max(best, re_inner(x, p.slope) - p.offset);
    return best;
  };
  ExpectationReport rep;
  rep.samples = samples;
  Rng rng(seed, "expectation");
  for (int i = 0; i < samples; ++i) {
    const Tuple z = random_tuple(A.ambient, arity, rng);
    const Tuple ez = conditional_expectation(A, z);
    rep.max_violation = std::max(rep.max_violation, value(ez) - value(z));
  }
  rep.pass = rep.max_violation <= tol;
  return rep;
}

}  // namespace tracelab
