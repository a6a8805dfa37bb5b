#include "tracelab/convex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace tracelab {

namespace {

// Re<x, y> = sum_k Re tau(x_k* y_{m+k}) between slots [0, m) and [m, 2m).
Predicate pairing_re(const AlgebraPtr& alg, int m) {
  TracePoly p;
  p.algebra = alg;
  p.arity = 2 * m;
  for (int k = 0; k < m; ++k) {
    Monomial mono;
    mono.coeff = Cx(1.0, 0.0);
    mono.letters = {Letter::variable(k, /*star=*/true),
                    Letter::variable(m + k)};
    p.monos.push_back(std::move(mono));
  }
  return Predicate::trace_re(std::move(p));
}

std::vector<int> slot_range(int begin, int count) {
  std::vector<int> s(count);
  std::iota(s.begin(), s.end(), begin);
  return s;
}

BallSpec scaled_ball(const BallSpec& b, double s) {
  BallSpec out = b;
  for (double& r : out.radii) r *= s;
  return out;
}

void require_ball_match(const Predicate& p, const BallSpec& b,
                        const char* who) {
  if (!p.valid()) throw Error(Errc::bad_input, std::string(who) + ": empty predicate");
  if (p.arity() <= 0)
    throw Error(Errc::bad_input, std::string(who) + ": predicate has no free slots");
  if (b.arity() != p.arity())
    throw Error(Errc::bad_input,
                std::string(who) + ": ball arity does not match predicate");
  for (double r : b.radii)
    if (!(r > 0.0))
      throw Error(Errc::bad_input, std::string(who) + ": ball radii must be positive");
}

void finalize(CheckReport& rep) {
  rep.pass = !rep.precheck_failed && rep.max_violation <= rep.tol;
}

// Largest ratio ||f(x_i) - f(x_j)|| / ||x_i - x_j|| over stored pairs.
template <typename V, typename DistF, typename DistX>
double pair_ratio(const std::vector<Tuple>& xs, const std::vector<V>& fs,
                  const DistF& df, const DistX& dx) {
  double best = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double den = dx(xs[i], xs[j]);
      if (den > 1e-12) best = std::max(best, df(fs[i], fs[j]) / den);
    }
  return best;
}

// Spectral diameter of a (near-)self-adjoint element of a one-block algebra.
double spec_diam(const Element& a) {
  Mat m = 0.5 * (a.block(0) + a.block(0).adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev(ev.size() - 1) - ev(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Regularization operations
// ---------------------------------------------------------------------------

Predicate legendre(const Predicate& psi, const BallSpec& r,
                   const InnerOptions& opt) {
  require_ball_match(psi, r, "legendre");
  const int m = psi.arity();
  // child(x, y) = Re<x, y> - psi(y) on 2m slots; the sup binds the y block
  // and is seeded from the projected x block.
  Predicate child =
      pairing_re(psi.algebra(), m) - psi.remap(2 * m, slot_range(m, m));
  Predicate out =
      Predicate::ball_sup(std::move(child), r, opt, slot_range(0, m));
  PredFlags f;
  f.semiconvex_c = 0.0;   // supremum of functions affine in x
  return out.with_flags(f);
}

Predicate inf_conv(const Predicate& phi, double t, const BallSpec& R,
                   const InnerOptions& opt) {
  require_ball_match(phi, R, "inf_conv");
  if (!(t > 0.0)) throw Error(Errc::bad_input, "inf_conv: t must be positive");
  const int m = phi.arity();
  Predicate child =
      phi.remap(2 * m, slot_range(m, m)) +
      Predicate::scale(1.0 / (2.0 * t),
                       Predicate::squared_dist(phi.algebra(), 2 * m, 0, m, m));
  Predicate out =
      Predicate::ball_inf(std::move(child), R, opt, slot_range(0, m));
  PredFlags f;
  f.semiconcave_c = 1.0 / t;
  // If phi + (c/2)||.||^2 is convex and ct < 1, the envelope stays
  // c/(1-ct)-semiconvex (with c = 1/u this is the familiar 1/(u-t)).
  const double c = phi.flags().semiconvex_c;
  if (std::isfinite(c) && c * t < 1.0) f.semiconvex_c = c / (1.0 - c * t);
  return out.with_flags(f);
}

Predicate sup_conv(const Predicate& phi, double t, const BallSpec& r,
                   const InnerOptions& opt) {
  require_ball_match(phi, r, "sup_conv");
  if (!(t > 0.0)) throw Error(Errc::bad_input, "sup_conv: t must be positive");
  const int m = phi.arity();
  Predicate child =
      phi.remap(2 * m, slot_range(m, m)) -
      Predicate::scale(1.0 / (2.0 * t),
                       Predicate::squared_dist(phi.algebra(), 2 * m, 0, m, m));
  Predicate out =
      Predicate::ball_sup(std::move(child), r, opt, slot_range(0, m));
  PredFlags f;
  f.semiconvex_c = 1.0 / t;
  const double c = phi.flags().semiconcave_c;
  if (std::isfinite(c) && c * t < 1.0) f.semiconcave_c = c / (1.0 - c * t);
  return out.with_flags(f);
}

Envelope lasry_lions(const Predicate& phi, const RegularizationParams& par,
                     const InnerOptions& opt) {
  require_ball_match(phi, par.outer, "lasry_lions");
  if (!(par.t > 0.0))
    throw Error(Errc::bad_input, "lasry_lions: t must be positive");
  if (par.inner.arity() != phi.arity())
    throw Error(Errc::bad_input, "lasry_lions: inner ball arity mismatch");
  for (int k = 0; k < par.outer.arity(); ++k)
    if (par.inner.radii[k] < par.outer.radii[k])
      throw Error(Errc::bad_input,
                  "lasry_lions: inner ball must contain the outer ball");
  if (std::isfinite(par.u) && !(par.t < par.u))
    throw Error(Errc::bad_input, "lasry_lions: requires t < u");

  Predicate base = phi;
  if (std::isfinite(par.u) && !std::isfinite(phi.flags().semiconvex_c)) {
    PredFlags f = phi.flags();
    f.semiconvex_c = 1.0 / par.u;
    base = phi.with_flags(f);
  }

  Envelope env;
  env.phi = base;
  env.par = par;
  env.opt = opt;
  env.ic = inf_conv(base, 2.0 * par.t, par.inner, opt);
  // The outer stage optimizes over values produced by inner solves, whose
  // gradients carry noise of order tol/t; a stationarity target below that
  // floor cannot be met and only burns the budget.  Strong concavity of the
  // outer problem keeps the value error near (t/2) * tol_outer^2.
  InnerOptions outer_opt = opt;
  outer_opt.tol = std::max(opt.tol, 1e-7);
  env.psi = sup_conv(env.ic, par.t, par.outer, outer_opt);
  return env;
}

EnvGradResult envelope_gradient(const Envelope& env, const Tuple& x) {
  if (!env.psi.valid())
    throw Error(Errc::bad_input, "envelope_gradient: empty envelope");
  if (x.algebra() != env.phi.algebra() || x.arity() != env.phi.arity())
    throw Error(Errc::bad_input, "envelope_gradient: tuple does not match");
  const double t = env.par.t;
  const Predicate& ic = env.ic;
  auto value = [&](const Tuple& w) {
    const double d = l2_dist(x, w);
    return ic.eval(w) - d * d / (2.0 * t);
  };
  auto grad = [&](const Tuple& w) {
    return ic.gradient(w) - (1.0 / t) * (w - x);
  };
  const std::vector<Tuple> starts = {project_ball(x, env.par.outer)};
  InnerOptions eopt = env.opt;   // same noise-floor reasoning as lasry_lions
  eopt.tol = std::max(eopt.tol, 1e-7);
  BallOptResult res =
      ball_optimize(value, grad, x.algebra(), env.par.outer,
                    /*maximize=*/true, eopt, "env-grad", starts);
  EnvGradResult out;
  out.value = res.value;
  out.witness = res.arg;
  out.grad = (1.0 / t) * (res.arg - x);
  out.converged = res.converged && ic.eval_full(res.arg).converged;
  out.boundary = res.boundary;
  return out;
}

Tuple fd_gradient(const std::function<double(const Tuple&)>& f, const Tuple& x,
                  double h) {
  if (h <= 0.0) h = 1e-5 * (1.0 + l2_norm(x));
  const AlgebraPtr& alg = x.algebra();
  const Eigen::VectorXd v = l2_rvec(x);
  Eigen::VectorXd g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    Eigen::VectorXd vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    g[i] = (f(l2_runvec(alg, x.arity(), vp)) -
            f(l2_runvec(alg, x.arity(), vm))) /
           (2.0 * h);
  }
  return l2_runvec(alg, x.arity(), g);
}

// ---------------------------------------------------------------------------
// Property checkers
// ---------------------------------------------------------------------------

namespace {

CheckReport chord_check(const ScalarFn& f, double c, const AlgebraPtr& alg,
                        const BallSpec& ball, int samples, std::uint64_t seed,
                        double tol, bool convex_side, std::string_view tag) {
  CheckReport rep;
  rep.samples = samples;
  rep.bound = c;
  rep.tol = tol;
  Rng rng(seed, tag);
  const double lams[] = {0.25, 0.5, 0.75};
  for (int i = 0; i < samples; ++i) {
    const Tuple x0 = random_tuple_in_ball(alg, ball, rng);
    const Tuple x1 = random_tuple_in_ball(alg, ball, rng);
    const double f0 = f(x0);
    const double f1 = f(x1);
    const double d2 = l2_dist(x0, x1) * l2_dist(x0, x1);
    for (const double lam : lams) {
      const Tuple mid = (1.0 - lam) * x0 + lam * x1;
      const double fm = f(mid);
      const double chord = (1.0 - lam) * f0 + lam * f1;
      const double quad = 0.5 * c * lam * (1.0 - lam) * d2;
      // convex side:  f(mid) <= chord + quad;  concave side: >= chord - quad.
      const double viol =
          convex_side ? fm - (chord + quad) : (chord - quad) - fm;
      rep.max_violation = std::max(rep.max_violation, viol);
    }
  }
  finalize(rep);
  return rep;
}

}  // namespace

CheckReport semiconvexity_check(const ScalarFn& f, double c,
                                const AlgebraPtr& alg, const BallSpec& ball,
                                int samples, std::uint64_t seed, double tol) {
  return chord_check(f, c, alg, ball, samples, seed, tol, /*convex_side=*/true,
                     "semiconvex");
}

CheckReport semiconcavity_check(const ScalarFn& f, double c,
                                const AlgebraPtr& alg, const BallSpec& ball,
                                int samples, std::uint64_t seed, double tol) {
  return chord_check(f, c, alg, ball, samples, seed, tol,
                     /*convex_side=*/false, "semiconcave");
}

CheckReport second_difference_check(const ScalarFn& f, double c,
                                    const AlgebraPtr& alg,
                                    const BallSpec& ball, int samples,
                                    std::uint64_t seed, double tol) {
  CheckReport rep;
  rep.samples = samples;
  rep.bound = c;
  rep.tol = tol;
  Rng rng(seed, "second-diff");
  // x + y + z stays in the ball: 0.5 + 0.05 + 0.05 of each radius.
  const BallSpec half = scaled_ball(ball, 0.5);
  const BallSpec tiny = scaled_ball(ball, 0.05);
  for (int i = 0; i < samples; ++i) {
    const Tuple x = random_tuple_in_ball(alg, half, rng);
    const Tuple y = random_tuple_in_ball(alg, tiny, rng);
    const Tuple z = random_tuple_in_ball(alg, tiny, rng);
    const double dd = f(x + y + z) - f(x + y) - f(x + z) + f(x);
    rep.max_violation = std::max(
        rep.max_violation, std::abs(dd) - c * l2_norm(y) * l2_norm(z));
  }
  finalize(rep);
  return rep;
}

CheckReport strong_convexity_expansion_check(const ScalarFn& f, double c,
                                             const AlgebraPtr& alg,
                                             const BallSpec& ball, int samples,
                                             std::uint64_t seed, double tol) {
  if (!(c > 0.0))
    throw Error(Errc::bad_input,
                "strong_convexity_expansion_check: c must be positive");
  CheckReport rep;
  rep.samples = samples;
  rep.bound = c;
  rep.tol = tol;
  Rng rng(seed, "strong-convexity");
  for (int i = 0; i < samples; ++i) {
    const Tuple x0 = random_tuple_in_ball(alg, ball, rng);
    const Tuple x1 = random_tuple_in_ball(alg, ball, rng);
    const Tuple g0 = fd_gradient(f, x0);
    const Tuple g1 = fd_gradient(f, x1);
    rep.max_violation = std::max(
        rep.max_violation, l2_dist(x0, x1) - l2_dist(g0, g1) / c);
  }
  finalize(rep);
  return rep;
}

CheckReport gradient_lipschitz_check(const TupleFn& grad, double lip,
                                     const AlgebraPtr& alg,
                                     const BallSpec& ball, int samples,
                                     std::uint64_t seed, double tol) {
  CheckReport rep;
  rep.samples = samples;
  rep.bound = lip;
  rep.tol = tol;
  Rng rng(seed, "grad-lip");
  for (int i = 0; i < samples; ++i) {
    const Tuple x0 = random_tuple_in_ball(alg, ball, rng);
    const Tuple x1 = random_tuple_in_ball(alg, ball, rng);
    rep.max_violation =
        std::max(rep.max_violation,
                 l2_dist(grad(x0), grad(x1)) - lip * l2_dist(x0, x1));
  }
  finalize(rep);
  return rep;
}

CheckReport spectral_diameter_check(const ElementFn& F, double lip,
                                    const AlgebraPtr& alg,
                                    const BallSpec& ball, int samples,
                                    std::uint64_t seed, double tol) {
  if (alg->num_blocks() != 1)
    throw Error(Errc::bad_input,
                "spectral_diameter_check: single-factor algebra required");
  CheckReport rep;
  rep.samples = samples;
  rep.tol = tol;
  Rng rng(seed, "spectral-diam");

  std::vector<Tuple> xs;
  std::vector<Element> fs;
  xs.reserve(samples);
  fs.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    xs.push_back(random_selfadjoint_tuple_in_ball(alg, ball, rng));
    fs.push_back(F(xs.back()));
  }

  // Probe self-adjointness of outputs and unitary equivariance before
  // trusting the spectral bound; either failure rejects F.
  const int probes = std::min(samples, 8);
  for (int i = 0; i < probes && !rep.precheck_failed; ++i) {
    if (l2_dist(fs[i], fs[i].adjoint()) > 1e-8) rep.precheck_failed = true;
    const Element u = random_unitary(alg, rng);
    Tuple conj(alg, xs[i].arity());
    for (int k = 0; k < xs[i].arity(); ++k)
      conj[k] = u * xs[i][k] * u.adjoint();
    if (l2_dist(F(conj), u * fs[i] * u.adjoint()) > 1e-8)
      rep.precheck_failed = true;
  }
  if (rep.precheck_failed) {
    rep.pass = false;
    return rep;
  }

  const double L =
      lip > 0.0 ? lip
                : pair_ratio(
                      xs, fs,
                      [](const Element& a, const Element& b) {
                        return l2_dist(a, b);
                      },
                      [](const Tuple& a, const Tuple& b) {
                        return l2_dist(a, b);
                      });
  rep.bound = L;

  for (int i = 0; i < samples; ++i) {
    double sum = 0.0;
    for (int k = 0; k < xs[i].arity(); ++k) {
      const double d = spec_diam(xs[i][k]);
      sum += d * d;
    }
    rep.max_violation = std::max(rep.max_violation,
                                 spec_diam(fs[i]) - L * std::sqrt(sum));
  }
  finalize(rep);
  return rep;
}

CheckReport range_bound_check(const TupleFn& F, const AlgebraPtr& alg,
                              const BallSpec& ball, int samples,
                              std::uint64_t seed, double tol) {
  CheckReport rep;
  rep.samples = samples;
  rep.tol = tol;
  Rng rng(seed, "range-bound");

  std::vector<Tuple> xs;
  std::vector<Tuple> fs;
  xs.reserve(samples);
  fs.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    xs.push_back(random_tuple_in_ball(alg, ball, rng));
    fs.push_back(F(xs.back()));
  }

  const Tuple f0 = F(Tuple(alg, ball.arity()));
  double t = 0.0;
  for (int k = 0; k < f0.arity(); ++k)
    t = std::max(t, std::abs(trace(f0[k])));
  const double L = pair_ratio(
      xs, fs,
      [](const Tuple& a, const Tuple& b) { return l2_dist(a, b); },
      [](const Tuple& a, const Tuple& b) { return l2_dist(a, b); });
  rep.bound = t + 9.0 * L * ball.l2_radius();

  for (const Tuple& fx : fs)
    for (int k = 0; k < fx.arity(); ++k)
      rep.max_violation =
          std::max(rep.max_violation, op_norm(fx[k]) - rep.bound);
  finalize(rep);
  return rep;
}

}  // namespace tracelab
