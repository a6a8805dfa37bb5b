#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "tracelab/algebra.hpp"
#include "tracelab/convex.hpp"
#include "tracelab/predicate.hpp"

using namespace tracelab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AlgebraPtr scalar_algebra() { return matrix_algebra(1); }

AlgebraPtr mixed_algebra() {
  // M_2 + M_1 with weights 3/4, 1/4.
  return make_algebra({Block{2, Rational(3, 4)}, Block{1, Rational(1, 4)}});
}

// One-entry tuple holding the scalar value v in M_1.
Tuple scalar_tuple(const AlgebraPtr& alg, Cx v) {
  Tuple x(alg, 1);
  x[0].block(0)(0, 0) = v;
  return x;
}

InnerOptions quick_opt() {
  InnerOptions opt;
  opt.restarts = 4;
  return opt;
}

// phi(z) = a ||z||^2 + Re<z, b> + c0 as a predicate (arity = b.arity()).
Predicate quadratic_predicate(const AlgebraPtr& alg, double a, const Tuple& b,
                              double c0) {
  return Predicate::scale(a, Predicate::squared_norm(alg, b.arity())) +
         Predicate::inner_re(b) + Predicate::constant(alg, b.arity(), c0);
}

// Independent value of the same quadratic at x.
double quadratic_value(double a, const Tuple& b, double c0, const Tuple& x) {
  const double n = l2_norm(x);
  return a * n * n + l2_inner(x, b).real() + c0;
}

}  // namespace

TEST_CASE("legendre on scalars matches support-function closed forms") {
  auto alg = scalar_algebra();
  const BallSpec disk = BallSpec::uniform(1, 1.0);

  // psi = 0: the transform is the support function of the unit disk, |x|.
  Predicate zero = Predicate::constant(alg, 1, 0.0);
  Predicate sup_fn = legendre(zero, disk, quick_opt());
  CHECK(sup_fn.flags().semiconvex_c == 0.0);
  CHECK(sup_fn.lipschitz(BallSpec::uniform(1, 5.0)) == doctest::Approx(1.0));
  for (Cx x : {Cx(0.3, 0.0), Cx(-0.7, 0.2), Cx(0.0, 1.9), Cx(-2.5, 0.0)}) {
    CHECK(sup_fn.eval(scalar_tuple(alg, x)) ==
          doctest::Approx(std::abs(x)).epsilon(1e-7));
  }

  // psi(y) = Re<y, z>: shifting the slope gives |x - z|.
  const Cx z(0.4, -0.3);
  Predicate shifted = legendre(Predicate::inner_re(scalar_tuple(alg, z)), disk,
                               quick_opt());
  for (Cx x : {Cx(1.2, 0.1), Cx(-0.5, -0.9), Cx(0.4, -0.3)}) {
    CHECK(shifted.eval(scalar_tuple(alg, x)) ==
          doctest::Approx(std::abs(x - z)).epsilon(1e-6));
  }

  // psi(y) = ||y||^2 / 2: the transform is the Huber function of |x|.
  Predicate huber = legendre(
      Predicate::scale(0.5, Predicate::squared_norm(alg, 1)), disk, quick_opt());
  auto huber_oracle = [](double m) {
    return m <= 1.0 ? 0.5 * m * m : m - 0.5;
  };
  for (Cx x : {Cx(0.6, 0.0), Cx(0.3, -0.4), Cx(2.0, -1.0), Cx(-1.1, 0.0)}) {
    CHECK(huber.eval(scalar_tuple(alg, x)) ==
          doctest::Approx(huber_oracle(std::abs(x))).epsilon(1e-7));
  }

  // Fenchel-Young: phi(x) + psi(y) >= Re<x,y> on the disk, with equality at
  // the interior argmax y* = x.
  const Tuple x0 = scalar_tuple(alg, Cx(0.8, 0.1));
  const double phi_x0 = huber.eval(x0);
  Rng rng(5, "fy-samples");
  for (int i = 0; i < 20; ++i) {
    const Tuple y = random_tuple_in_ball(alg, disk, rng);
    const double psi_y = 0.5 * l2_norm(y) * l2_norm(y);
    CHECK(phi_x0 + psi_y - l2_inner(x0, y).real() >= -1e-9);
  }
  const double gap_at_argmax =
      phi_x0 + 0.5 * l2_norm(x0) * l2_norm(x0) - l2_inner(x0, x0).real();
  CHECK(std::abs(gap_at_argmax) <= 1e-8);
}

TEST_CASE("legendre of the half squared norm is quadratic near zero") {
  auto alg = mixed_algebra();
  const BallSpec big = BallSpec::uniform(2, 3.0);
  Predicate psi = Predicate::scale(0.5, Predicate::squared_norm(alg, 2));
  Predicate phi = legendre(psi, big, quick_opt());

  Rng rng(17, "legendre-quad");
  for (int i = 0; i < 4; ++i) {
    const Tuple x =
        random_tuple_in_ball(alg, BallSpec::uniform(2, 0.8), rng);
    const double n = l2_norm(x);
    CHECK(phi.eval(x) == doctest::Approx(0.5 * n * n).epsilon(1e-7));
  }

  // Declared convexity validated by the midpoint checker (strongly concave
  // inner problems, so each evaluation is certified).
  auto f = [&](const Tuple& x) { return phi.eval(x); };
  CheckReport rep = semiconvexity_check(f, 0.0, alg,
                                        BallSpec::uniform(2, 0.8), 6, 3, 1e-9);
  CHECK(rep.pass);
}

TEST_CASE("inf_conv and sup_conv match complete-the-square closed forms") {
  auto alg = mixed_algebra();
  Rng rng(23, "conv-quad");
  const Tuple b =
      random_tuple_in_ball(alg, BallSpec::uniform(1, 0.5), rng);
  const BallSpec big = BallSpec::uniform(1, 4.0);
  const double c0 = 0.3;

  SUBCASE("inf_conv of a strongly convex quadratic") {
    const double a = 0.7, t = 0.37;
    Predicate ic = inf_conv(quadratic_predicate(alg, a, b, c0), t, big,
                            quick_opt());
    CHECK(ic.flags().semiconcave_c == doctest::Approx(1.0 / t));
    CHECK(ic.flags().semiconvex_c == kInf);
    for (int i = 0; i < 4; ++i) {
      const Tuple x =
          random_tuple_in_ball(alg, BallSpec::uniform(1, 1.0), rng);
      // Complete the square: the minimizer is z* = (x - t b) / (1 + 2 a t).
      const Tuple zs = (1.0 / (1.0 + 2.0 * a * t)) * (x - t * b);
      const double d = l2_dist(x, zs);
      const double want =
          quadratic_value(a, b, c0, zs) + d * d / (2.0 * t);
      CHECK(ic.eval(x) == doctest::Approx(want).epsilon(1e-7));
    }
  }

  SUBCASE("declared semiconvexity propagates through inf_conv") {
    PredFlags convex_flag;
    convex_flag.semiconvex_c = 0.0;
    Predicate phi = quadratic_predicate(alg, 0.7, b, c0).with_flags(convex_flag);
    CHECK(inf_conv(phi, 0.37, big, quick_opt()).flags().semiconvex_c == 0.0);
  }

  SUBCASE("sup_conv of a mildly concave-compatible quadratic") {
    const double a = 0.3, t = 0.5;   // 2 a t = 0.3 < 1 keeps the sup finite
    Predicate sc = sup_conv(quadratic_predicate(alg, a, b, c0), t, big,
                            quick_opt());
    CHECK(sc.flags().semiconvex_c == doctest::Approx(1.0 / t));
    for (int i = 0; i < 4; ++i) {
      const Tuple x =
          random_tuple_in_ball(alg, BallSpec::uniform(1, 1.0), rng);
      // Maximizer z* = (x + t b) / (1 - 2 a t).
      const Tuple zs = (1.0 / (1.0 - 2.0 * a * t)) * (x + t * b);
      const double d = l2_dist(x, zs);
      const double want =
          quadratic_value(a, b, c0, zs) - d * d / (2.0 * t);
      CHECK(sc.eval(x) == doctest::Approx(want).epsilon(1e-7));
    }
  }

  SUBCASE("constant and linear base cases") {
    Predicate cst = Predicate::constant(alg, 1, 1.25);
    Predicate ic = inf_conv(cst, 0.2, big, quick_opt());
    const Tuple x = random_tuple_in_ball(alg, BallSpec::uniform(1, 1.0), rng);
    CHECK(ic.eval(x) == doctest::Approx(1.25).epsilon(1e-10));

    // inf_conv of Re<z, w> is Re<x, w> - (t/2)||w||^2 (minimizer x - t w).
    const double t = 0.45;
    Predicate lin = inf_conv(Predicate::inner_re(b), t, big, quick_opt());
    const double nb = l2_norm(b);
    CHECK(lin.eval(x) == doctest::Approx(l2_inner(x, b).real() -
                                         0.5 * t * nb * nb)
                             .epsilon(1e-7));
  }
}

TEST_CASE("inf_conv is monotone in t and sandwiched below the base") {
  auto alg = mixed_algebra();
  Rng rng(29, "conv-sandwich");
  const Tuple b = random_tuple_in_ball(alg, BallSpec::uniform(1, 0.5), rng);
  Predicate phi = quadratic_predicate(alg, 0.6, b, -0.2);
  const BallSpec R = BallSpec::uniform(1, 1.5);

  std::vector<double> ts = {0.6, 0.3, 0.1};
  std::vector<Predicate> envs;
  for (double t : ts) envs.push_back(inf_conv(phi, t, R, quick_opt()));

  const double omega_2R = phi.modulus(R, 2.0 * R.l2_radius());
  for (int i = 0; i < 5; ++i) {
    const Tuple x = random_tuple_in_ball(alg, BallSpec::uniform(1, 1.3), rng);
    const double base = phi.eval(x);
    double prev = -kInf;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double v = envs[k].eval(x);
      // Monotone: shrinking t raises the envelope toward the base.
      CHECK(v >= prev - 1e-8);
      prev = v;
      // Error sandwich with the symbolic modulus of continuity.
      const double low = -phi.modulus(R, std::sqrt(2.0 * ts[k] * omega_2R));
      CHECK(v - base <= 1e-9);
      CHECK(v - base >= low - 1e-9);
    }
  }

  // Lipschitz estimate on a smaller ball: both the symbolic tree bound and
  // the coarse 2|R + r'|/t bound must dominate sampled difference quotients.
  const BallSpec small = BallSpec::uniform(1, 1.0);
  const double t = ts.back();
  const Predicate& env = envs.back();
  const double tree_lip = env.lipschitz(small);
  double coarse = 0.0;
  for (int k = 0; k < small.arity(); ++k) {
    const double s = R.radii[k] + small.radii[k];
    coarse += s * s;
  }
  coarse = 2.0 * std::sqrt(coarse) / t;
  for (int i = 0; i < 6; ++i) {
    const Tuple x = random_tuple_in_ball(alg, small, rng);
    const Tuple y = random_tuple_in_ball(alg, small, rng);
    const double dq = std::abs(env.eval(x) - env.eval(y));
    CHECK(dq <= tree_lip * l2_dist(x, y) + 1e-8);
    CHECK(dq <= coarse * l2_dist(x, y) + 1e-8);
    CHECK(tree_lip <= coarse + 1e-12);
  }
}

TEST_CASE("lasry_lions reproduces quadratic and linear closed forms") {
  auto alg = matrix_algebra(2);

  SUBCASE("half squared norm") {
    RegularizationParams par;
    par.t = 0.4;
    par.outer = BallSpec::uniform(1, 1.0);
    par.inner = BallSpec::uniform(1, 2.0);
    Envelope env = lasry_lions(
        Predicate::scale(0.5, Predicate::squared_norm(alg, 1)), par,
        quick_opt());
    CHECK(env.psi.flags().semiconvex_c == doctest::Approx(1.0 / par.t));
    CHECK(env.psi.flags().semiconcave_c == doctest::Approx(1.0 / par.t));

    Rng rng(31, "ll-quad");
    for (int i = 0; i < 3; ++i) {
      const Tuple x =
          random_tuple_in_ball(alg, BallSpec::uniform(1, 0.5), rng);
      const double n = l2_norm(x);
      // Two nested complete-the-squares give ||x||^2 / (2 (1 + t)).
      CHECK(env.value(x) ==
            doctest::Approx(n * n / (2.0 * (1.0 + par.t))).epsilon(1e-7));
      // And the gradient x / (1 + t).
      EnvGradResult g = envelope_gradient(env, x);
      CHECK(g.converged);
      CHECK(l2_dist(g.grad, (1.0 / (1.0 + par.t)) * x) <= 1e-6);
    }
  }

  SUBCASE("linear predicate keeps its slope") {
    Rng rng(37, "ll-lin");
    Tuple z = random_selfadjoint_tuple_in_ball(
        alg, BallSpec::uniform(1, 0.6), rng);
    RegularizationParams par;
    par.t = 0.3;   // t * op_norm(z) < r/2 = 0.5
    par.outer = BallSpec::uniform(1, 1.0);
    par.inner = BallSpec::uniform(1, 1.6);
    Envelope env = lasry_lions(Predicate::inner_re(z), par, quick_opt());

    const double nz = l2_norm(z);
    for (int i = 0; i < 3; ++i) {
      const Tuple x =
          random_tuple_in_ball(alg, BallSpec::uniform(1, 0.5), rng);
      CHECK(env.value(x) == doctest::Approx(l2_inner(x, z).real() -
                                            0.5 * par.t * nz * nz)
                                .epsilon(1e-7));
    }
    // The gradient at zero recovers the slope exactly.
    EnvGradResult g = envelope_gradient(env, Tuple(alg, 1));
    CHECK(g.converged);
    CHECK(!g.boundary);
    CHECK(l2_dist(g.grad, z) <= 1e-5);
  }

  SUBCASE("constant predicate is fixed with zero gradient") {
    RegularizationParams par;
    par.t = 0.25;
    par.outer = BallSpec::uniform(1, 1.0);
    par.inner = BallSpec::uniform(1, 1.5);
    Envelope env = lasry_lions(Predicate::constant(alg, 1, -2.5), par,
                               quick_opt());
    Rng rng(41, "ll-const");
    const Tuple x = random_tuple_in_ball(alg, par.outer, rng);
    CHECK(env.value(x) == doctest::Approx(-2.5).epsilon(1e-9));
    EnvGradResult g = envelope_gradient(env, x);
    CHECK(l2_norm(g.grad) <= 1e-6);
  }

  SUBCASE("parameter validation") {
    RegularizationParams par;
    par.t = 0.2;
    par.outer = BallSpec::uniform(1, 1.0);
    par.inner = BallSpec::uniform(1, 0.5);   // smaller than outer: invalid
    Predicate phi = Predicate::squared_norm(alg, 1);
    CHECK_THROWS_AS(lasry_lions(phi, par, quick_opt()), Error);
    par.inner = BallSpec::uniform(1, 2.0);
    par.t = 0.0;
    CHECK_THROWS_AS(lasry_lions(phi, par, quick_opt()), Error);
    par.t = 0.5;
    par.u = 0.4;   // requires t < u
    CHECK_THROWS_AS(lasry_lions(phi, par, quick_opt()), Error);

    // A declared budget u seeds the semiconvexity flags of the pieces.
    par.t = 0.1;
    par.u = 1.0;
    Envelope env = lasry_lions(phi, par, quick_opt());
    CHECK(env.phi.flags().semiconvex_c == doctest::Approx(1.0));
    // inf_conv with parameter 2t: c / (1 - 2tc) = 1 / (1 - 0.2) = 1.25.
    CHECK(env.ic.flags().semiconvex_c == doctest::Approx(1.25));
  }
}

TEST_CASE("lasry_lions regularity, sandwich and gradients on a trace polynomial") {
  auto alg = matrix_algebra(2);
  Rng rng(43, "ll-poly");
  const Element a0 = random_selfadjoint(alg, rng);

  // phi = Re[ (1+0.5i) tau(x0 x0 a) + 0.8 tau(x0 a x0* x0) ] — a degree-3
  // non-convex trace polynomial in one variable.
  TracePoly p;
  p.algebra = alg;
  p.arity = 1;
  {
    Monomial m;
    m.coeff = Cx(1.0, 0.5);
    m.letters = {Letter::variable(0), Letter::variable(0),
                 Letter::constant(a0)};
    p.monos.push_back(m);
  }
  {
    Monomial m;
    m.coeff = Cx(0.8, 0.0);
    m.letters = {Letter::variable(0), Letter::constant(a0),
                 Letter::variable(0, true), Letter::variable(0)};
    p.monos.push_back(m);
  }
  Predicate phi = Predicate::trace_re(p);

  RegularizationParams par;
  par.outer = BallSpec::uniform(1, 0.8);
  par.inner = BallSpec::uniform(1, 1.2);
  // Strongly convex inner problems need 1/(4t) to clear the curvature bound
  // with real margin; at 1/(4t) = H the problem is only barely convex and the
  // flat directions stall the solver.
  const double curv = phi.curvature(par.inner);
  par.t = std::min(0.125 / curv, 0.3);
  InnerOptions opt;
  opt.restarts = 1;   // unique optima: the seeded and zero starts suffice
  Envelope env = lasry_lions(phi, par, opt);
  auto f = [&](const Tuple& x) { return env.psi.eval(x); };

  // Declared 1/t regularity holds at midpoints.
  CHECK(semiconvexity_check(f, 1.0 / par.t, alg, par.outer, 8, 47, 1e-8).pass);
  CHECK(semiconcavity_check(f, 1.0 / par.t, alg, par.outer, 8, 53, 1e-8).pass);

  // Two-sided error sandwich with the symbolic modulus of continuity.
  const double om_in = phi.modulus(par.inner, 2.0 * par.inner.l2_radius());
  const double low =
      -phi.modulus(par.inner, std::sqrt(4.0 * par.t * om_in));
  const double om_out = phi.modulus(par.outer, 2.0 * par.outer.l2_radius());
  const double up = phi.modulus(par.outer, std::sqrt(2.0 * par.t * om_out));
  for (int i = 0; i < 6; ++i) {
    const Tuple x = random_tuple_in_ball(alg, par.outer, rng);
    const double diff = env.value(x) - phi.eval(x);
    CHECK(diff >= low - 1e-9);
    CHECK(diff <= up + 1e-9);
  }

  // Envelope gradients: finite-difference agreement, quadratic expansion,
  // containment in the dilated ball, and the Lipschitz bound 1/t.
  const BallSpec half = BallSpec::uniform(1, 0.4);
  for (int i = 0; i < 3; ++i) {
    const Tuple x = random_tuple_in_ball(alg, half, rng);
    EnvGradResult g = envelope_gradient(env, x);
    CHECK(g.converged);
    const Tuple fd = fd_gradient(f, x);
    CHECK(l2_dist(g.grad, fd) <= 1e-4 * (1.0 + l2_norm(fd)));
    for (int k = 0; k < g.grad.arity(); ++k) {
      const double cap =
          (par.outer.radii[k] + half.radii[k]) / par.t + 1e-6;
      CHECK(op_norm(g.grad[k]) <= cap);
    }
    const Tuple x2 = random_tuple_in_ball(alg, half, rng);
    const double lhs = std::abs(env.value(x2) - env.value(x) -
                                l2_inner(x2 - x, g.grad).real());
    const double d = l2_dist(x, x2);
    CHECK(lhs <= d * d / (2.0 * par.t) + 1e-8);
  }
  auto grad_fn = [&](const Tuple& x) { return envelope_gradient(env, x).grad; };
  CHECK(gradient_lipschitz_check(grad_fn, 1.0 / par.t, alg, half, 6, 59, 1e-6)
            .pass);
}

TEST_CASE("checker equality cases on quadratics") {
  auto alg = mixed_algebra();
  const BallSpec ball = BallSpec::uniform(2, 1.0);
  auto half_sq = [](const Tuple& x) {
    const double n = l2_norm(x);
    return 0.5 * n * n;
  };
  auto neg_half_sq = [&](const Tuple& x) { return -half_sq(x); };

  // Convexity of ||x||^2/2 and the exact semiconvexity threshold of its
  // negative: both sit at violation ~0.
  CheckReport cvx = semiconvexity_check(half_sq, 0.0, alg, ball, 40, 61);
  CHECK(cvx.pass);
  CHECK(cvx.max_violation <= 1e-10);
  CheckReport thr = semiconvexity_check(neg_half_sq, 1.0, alg, ball, 40, 67);
  CHECK(thr.pass);
  CHECK(std::abs(thr.max_violation) <= 1e-10);
  CHECK_FALSE(semiconvexity_check(neg_half_sq, 0.9, alg, ball, 40, 71).pass);
  CheckReport ccv = semiconcavity_check(neg_half_sq, 0.0, alg, ball, 40, 73);
  CHECK(ccv.pass);

  // Second differences of ||x||^2/2 equal 2 Re<y, z> / 2 = Re<y, z>.
  CheckReport sd = second_difference_check(half_sq, 1.0, alg, ball, 60, 79);
  CHECK(sd.pass);
  auto linear = [&](const Tuple& x) {
    Tuple w(x.algebra(), x.arity());
    w[0] = Element::identity(x.algebra());
    return l2_inner(x, w).real();
  };
  CheckReport lin = second_difference_check(linear, 0.0, alg, ball, 30, 83);
  CHECK(lin.pass);
  CHECK(std::abs(lin.max_violation) <= 1e-12);

  // Strong convexity expansion is tight for (c/2)||x||^2 + linear.
  Rng rng(89, "checker-quad");
  const Tuple b = random_tuple_in_ball(alg, ball, rng);
  const double c = 1.3;
  auto strong = [&](const Tuple& x) {
    const double n = l2_norm(x);
    return 0.5 * c * n * n + l2_inner(x, b).real();
  };
  CheckReport sc = strong_convexity_expansion_check(strong, c, alg, ball, 25, 97);
  CHECK(sc.pass);
  CHECK(std::abs(sc.max_violation) <= 1e-6);

  // Gradient of ||x||^2/2 is the identity map: Lipschitz constant 1 exactly.
  auto id_grad = [](const Tuple& x) { return x; };
  CheckReport gl = gradient_lipschitz_check(id_grad, 1.0, alg, ball, 30, 101);
  CHECK(gl.pass);
  CHECK(std::abs(gl.max_violation) <= 1e-12);
}

TEST_CASE("spectral diameter and range bounds accept equivariant maps") {
  auto alg = matrix_algebra(3);
  const BallSpec ball = BallSpec::uniform(2, 1.0);

  // Identity on the first variable: Lipschitz 1, bound holds with slack.
  auto first = [](const Tuple& x) { return x[0]; };
  CHECK(spectral_diameter_check(first, 1.0, alg, ball, 40, 103).pass);

  // tau(x0) * 1 has zero spectral diameter.
  auto tracial = [](const Tuple& x) {
    return trace(x[0]) * Element::identity(x.algebra());
  };
  CHECK(spectral_diameter_check(tracial, 1.0, alg, ball, 40, 107).pass);

  // Squaring is equivariant; the Lipschitz constant is estimated from pairs.
  auto square = [](const Tuple& x) { return x[0] * x[0]; };
  CheckReport sq = spectral_diameter_check(square, 0.0, alg, ball, 40, 109);
  CHECK(sq.pass);
  CHECK(sq.bound > 0.0);

  // A fixed non-scalar matrix is not equivariant: rejected by the probe.
  Element proj(alg);
  proj.block(0)(0, 0) = 1.0;
  auto not_equivariant = [&](const Tuple&) { return proj; };
  CheckReport rej = spectral_diameter_check(not_equivariant, 1.0, alg, ball,
                                            10, 113);
  CHECK(rej.precheck_failed);
  CHECK_FALSE(rej.pass);

  // i * x0 is skew-adjoint on self-adjoint input: rejected.
  auto skew = [](const Tuple& x) { return Cx(0.0, 1.0) * x[0]; };
  CHECK(spectral_diameter_check(skew, 1.0, alg, ball, 10, 127).precheck_failed);

  // Range bound: identity map (t = 0) and constant map (t = |c|, L = 0).
  auto ident = [](const Tuple& x) { return x; };
  CHECK(range_bound_check(ident, alg, ball, 30, 131).pass);
  auto constant = [&](const Tuple& x) {
    Tuple out(x.algebra(), 1);
    out[0] = 0.7 * Element::identity(x.algebra());
    return out;
  };
  CheckReport cst = range_bound_check(constant, alg, ball, 30, 137);
  CHECK(cst.pass);
  CHECK(cst.bound == doctest::Approx(0.7));
}
