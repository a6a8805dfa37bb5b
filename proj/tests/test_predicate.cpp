#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tracelab/algebra.hpp"
#include "tracelab/predicate.hpp"

using namespace tracelab;

namespace {

AlgebraPtr mixed_algebra() {
  // M_2 + M_3 with weights 1/3, 2/3.
  return make_algebra({Block{2, Rational(1, 3)}, Block{3, Rational(2, 3)}});
}

// Independent evaluation of one monomial c * tau(L_1 ... L_p) with explicit
// per-block products and the weighted normalized trace.
Cx monomial_oracle(const AlgebraPtr& alg, Cx c, const std::vector<Mat>& b0,
                   const std::vector<Mat>& b1) {
  Cx acc(0, 0);
  const std::vector<const std::vector<Mat>*> blocks = {&b0, &b1};
  for (int j = 0; j < alg->num_blocks(); ++j) {
    const int n = alg->block_dim(j);
    Mat p = Mat::Identity(n, n);
    for (const Mat& m : *blocks[j]) p = p * m;
    acc += alg->weight_d(j) * p.trace() / double(n);
  }
  return c * acc;
}

Mat blk(const Element& e, int j, bool star) {
  if (star) return e.block(j).adjoint();
  return e.block(j);
}

}  // namespace

TEST_CASE("trace polynomial values match explicit matrix arithmetic") {
  auto alg = mixed_algebra();
  Rng rng(11, "pred-values");
  const Tuple x = random_tuple(alg, 2, rng);
  const Element a = random_element(alg, rng);

  // phi = Re[(2+i) tau(x0 x1* a x0) - 3 tau(x1 x1)]
  TracePoly p;
  p.algebra = alg;
  p.arity = 2;
  {
    Monomial m;
    m.coeff = Cx(2.0, 1.0);
    m.letters = {Letter::variable(0), Letter::variable(1, true),
                 Letter::constant(a), Letter::variable(0)};
    p.monos.push_back(m);
  }
  {
    Monomial m;
    m.coeff = Cx(-3.0, 0.0);
    m.letters = {Letter::variable(1), Letter::variable(1)};
    p.monos.push_back(m);
  }

  Cx expect(0, 0);
  for (int take = 0; take < 2; ++take) {
    std::vector<Mat> b0, b1;
    if (take == 0) {
      b0 = {blk(x[0], 0, false), blk(x[1], 0, true), blk(a, 0, false),
            blk(x[0], 0, false)};
      b1 = {blk(x[0], 1, false), blk(x[1], 1, true), blk(a, 1, false),
            blk(x[0], 1, false)};
      expect += monomial_oracle(alg, Cx(2.0, 1.0), b0, b1);
    } else {
      b0 = {blk(x[1], 0, false), blk(x[1], 0, false)};
      b1 = {blk(x[1], 1, false), blk(x[1], 1, false)};
      expect += monomial_oracle(alg, Cx(-3.0, 0.0), b0, b1);
    }
  }

  const Cx got = trace_poly_value(p, x);
  CHECK(std::abs(got - expect) <= 1e-12 * (1.0 + std::abs(expect)));
  CHECK(Predicate::trace_re(p).eval(x) == doctest::Approx(expect.real()).epsilon(1e-12));
  CHECK(Predicate::trace_im(p).eval(x) == doctest::Approx(expect.imag()).epsilon(1e-12));

  // Degree-zero monomial: tau(1) = 1.
  TracePoly unit;
  unit.algebra = alg;
  unit.arity = 0;
  unit.monos.push_back(Monomial{Cx(4.0, -2.0), {}});
  CHECK(trace_poly_value(unit, Tuple(alg, 0)) == Cx(4.0, -2.0));
}

TEST_CASE("analytic gradients match central differences") {
  auto alg = mixed_algebra();
  Rng rng(23, "pred-grad");
  const Element a = random_element(alg, rng);

  TracePoly p;
  p.algebra = alg;
  p.arity = 2;
  {
    // (1-2i) tau(x0 a x0 x1*): repeated plain occurrences plus a star.
    Monomial m;
    m.coeff = Cx(1.0, -2.0);
    m.letters = {Letter::variable(0), Letter::constant(a),
                 Letter::variable(0), Letter::variable(1, true)};
    p.monos.push_back(m);
  }
  {
    // 0.5 tau(x1* x1 x1*): variable and its adjoint interleaved.
    Monomial m;
    m.coeff = Cx(0.5, 0.0);
    m.letters = {Letter::variable(1, true), Letter::variable(1),
                 Letter::variable(1, true)};
    p.monos.push_back(m);
  }

  const Predicate re = Predicate::trace_re(p);
  const Predicate im = Predicate::trace_im(p);
  const Predicate composite = Predicate::max(
      Predicate::mul(re, re) - Predicate::scale(0.3, im), Predicate::abs(im));

  for (int trial = 0; trial < 4; ++trial) {
    const Tuple x = random_tuple(alg, 2, rng);
    for (const Predicate* f : {&re, &im, &composite}) {
      const Tuple g = f->gradient(x);
      const Tuple fd = oracles::fd_gradient(
          [&](const Tuple& z) { return f->eval(z); }, x, 1e-5);
      const double scale = 1.0 + l2_norm(fd);
      CHECK(l2_dist(g, fd) / scale <= 1e-6);
    }
  }
}

TEST_CASE("symbolic value, Lipschitz and curvature bounds hold on samples") {
  auto alg = mixed_algebra();
  Rng rng(31, "pred-bounds");
  const Element a = random_element(alg, rng);

  TracePoly p;
  p.algebra = alg;
  p.arity = 2;
  {
    Monomial m;
    m.coeff = Cx(0.7, 0.4);
    m.letters = {Letter::variable(0), Letter::variable(1, true),
                 Letter::variable(0, true)};
    p.monos.push_back(m);
  }
  {
    Monomial m;
    m.coeff = Cx(-1.2, 0.0);
    m.letters = {Letter::variable(1), Letter::constant(a),
                 Letter::variable(1, true), Letter::variable(0)};
    p.monos.push_back(m);
  }
  const Predicate f = Predicate::trace_re(p);

  BallSpec ball;
  ball.radii = {1.5, 0.8};
  const double V = f.value_bound(ball);
  const double L = f.lipschitz(ball);
  const double H = f.curvature(ball);
  CHECK(V > 0.0);
  CHECK(L > 0.0);
  CHECK(H > 0.0);

  BallSpec half;
  half.radii = {0.75, 0.4};
  for (int trial = 0; trial < 50; ++trial) {
    const Tuple x = random_tuple_in_ball(alg, half, rng);
    const Tuple xp = random_tuple_in_ball(alg, ball, rng);
    CHECK(std::abs(f.eval(x)) <= V + 1e-10);
    CHECK(std::abs(f.eval(x) - f.eval(xp)) <= L * l2_dist(x, xp) + 1e-10);

    // Mixed second difference within D_ball: x in the half ball, y and z
    // small enough that all four corners stay inside D_ball.
    Tuple y = 0.05 * random_tuple_in_ball(alg, half, rng);
    Tuple z = 0.05 * random_tuple_in_ball(alg, half, rng);
    const double second = f.eval(x + y + z) - f.eval(x + y) -
                          f.eval(x + z) + f.eval(x);
    CHECK(std::abs(second) <= H * l2_norm(y) * l2_norm(z) + 1e-10);
  }

  // The modulus is the Lipschitz bound scaled by the step.
  CHECK(f.modulus(ball, 0.25) == doctest::Approx(0.25 * L).epsilon(1e-12));
}

TEST_CASE("remap relabels variable slots") {
  auto alg = mixed_algebra();
  Rng rng(41, "pred-remap");

  const Element a = random_element(alg, rng);
  TracePoly p;
  p.algebra = alg;
  p.arity = 2;
  Monomial m;
  m.coeff = Cx(1.0, 0.5);
  m.letters = {Letter::variable(0), Letter::variable(1, true),
               Letter::constant(a)};
  p.monos.push_back(m);
  const Predicate f = Predicate::trace_re(p);

  // g(z0, z1, z2) = f(z2, z0).
  const Predicate g = f.remap(3, {2, 0});
  const Tuple z = random_tuple(alg, 3, rng);
  const Tuple xz = Tuple(std::vector<Element>{z[2], z[0]});
  CHECK(g.eval(z) == doctest::Approx(f.eval(xz)).epsilon(1e-12));

  // Remapping commutes with quantification: sup_y f(x, y) with x relabeled.
  InnerOptions opt;
  opt.restarts = 4;
  const Predicate sup_f =
      Predicate::ball_sup(f, BallSpec::uniform(1, 1.0), opt, {0});
  const Predicate sup_g = sup_f.remap(2, {1});
  const Tuple w = random_tuple(alg, 2, rng);
  const Tuple w1 = w.slice(1, 1);
  CHECK(sup_g.eval(w) == doctest::Approx(sup_f.eval(w1)).epsilon(1e-10));
}

TEST_CASE("ball_sup of a linear functional attains the support function") {
  auto alg = mixed_algebra();
  Rng rng(53, "pred-support");
  const Element a = random_element(alg, rng);
  const double r = 0.75;

  // sup over ||y||_op <= r of Re<y, a> equals r times the weighted nuclear
  // norm of a (dual pairing of the operator-norm ball), computed from SVDs.
  const double expect =
      r * oracles::weighted_nuclear(a);

  const Predicate lin = Predicate::inner_re(Tuple(std::vector<Element>{a}));
  const Predicate sup = Predicate::ball_sup(lin, BallSpec::uniform(1, r));
  const EvalInfo info = sup.eval_full(Tuple(alg, 0));
  CHECK(info.value == doctest::Approx(expect).epsilon(1e-7));
  CHECK(info.converged);
  CHECK(info.boundary);

  // A starved budget must be reported, not hidden.
  InnerOptions tiny;
  tiny.restarts = 1;
  tiny.budget = 2;
  const Predicate starved =
      Predicate::ball_sup(lin, BallSpec::uniform(1, r), tiny);
  CHECK_FALSE(starved.eval_full(Tuple(alg, 0)).converged);
}

TEST_CASE("ball_sup with an interior maximizer converges and is unflagged") {
  auto alg = mixed_algebra();
  Rng rng(67, "pred-interior");
  BallSpec small = BallSpec::uniform(1, 0.3);
  const Tuple c = random_tuple_in_ball(alg, small, rng);

  // sup over ||y||_op <= 1 of -||y - c||^2 = 0, attained at y = c inside.
  TracePoly p;
  p.algebra = alg;
  p.arity = 1;
  auto add = [&p](Cx coeff, std::vector<Letter> ls) {
    Monomial m;
    m.coeff = coeff;
    m.letters = std::move(ls);
    p.monos.push_back(std::move(m));
  };
  add({-1.0, 0.0}, {Letter::variable(0, true), Letter::variable(0)});
  add({1.0, 0.0}, {Letter::variable(0, true), Letter::constant(c[0])});
  add({1.0, 0.0}, {Letter::constant(c[0], true), Letter::variable(0)});
  add({-1.0, 0.0}, {Letter::constant(c[0], true), Letter::constant(c[0])});

  const Predicate sup =
      Predicate::ball_sup(Predicate::trace_re(p), BallSpec::uniform(1, 1.0));
  const EvalInfo info = sup.eval_full(Tuple(alg, 0));
  CHECK(std::abs(info.value) <= 1e-12);
  CHECK(info.converged);
  CHECK_FALSE(info.boundary);

  // Deterministic: the same evaluation twice gives bit-identical values.
  CHECK(sup.eval(Tuple(alg, 0)) == info.value);
}

TEST_CASE("envelope gradients differentiate through the inner witness") {
  auto alg = mixed_algebra();
  Rng rng(71, "pred-danskin");

  // phi(x) = sup_{||y||_op <= 1} [ Re<x, y> - 0.5 ||y||^2 ]; for small x the
  // witness is y = x, so phi = 0.5 ||x||^2 with gradient x.
  const int m = 1;
  TracePoly couple;
  couple.algebra = alg;
  couple.arity = 2;
  Monomial cm;
  cm.coeff = Cx(1.0, 0.0);
  cm.letters = {Letter::variable(0, true), Letter::variable(1)};
  couple.monos.push_back(cm);
  const Predicate child =
      Predicate::trace_re(couple) -
      Predicate::scale(0.5, Predicate::squared_norm(alg, 1).remap(2, {1}));
  const Predicate phi =
      Predicate::ball_sup(child, BallSpec::uniform(m, 1.0), {}, {0});

  BallSpec inner = BallSpec::uniform(1, 0.5);
  for (int trial = 0; trial < 3; ++trial) {
    const Tuple x = random_tuple_in_ball(alg, inner, rng);
    CHECK(phi.eval(x) == doctest::Approx(0.5 * l2_norm(x) * l2_norm(x))
                             .epsilon(1e-8));
    const Tuple g = phi.gradient(x);
    CHECK(l2_dist(g, x) <= 1e-6 * (1.0 + l2_norm(x)));
    const Tuple fd = oracles::fd_gradient(
        [&](const Tuple& z) { return phi.eval(z); }, x, 1e-5);
    CHECK(l2_dist(g, fd) <= 1e-4 * (1.0 + l2_norm(fd)));
  }
}

TEST_CASE("constructor validation rejects malformed predicates") {
  auto alg = mixed_algebra();
  auto other = matrix_algebra(2);
  Rng rng(83, "pred-validate");

  TracePoly bad;
  bad.algebra = alg;
  bad.arity = 1;
  Monomial m;
  m.coeff = Cx(1.0, 0.0);
  m.letters = {Letter::variable(2)};
  bad.monos.push_back(m);
  CHECK_THROWS_AS((void)Predicate::trace_re(bad), Error);

  const Predicate f = Predicate::squared_norm(alg, 2);
  const Predicate g = Predicate::squared_norm(other, 2);
  CHECK_THROWS_AS((void)(f + g), Error);

  CHECK_THROWS_AS(
      (void)Predicate::ball_sup(f, BallSpec::uniform(3, 1.0)), Error);
  CHECK_THROWS_AS((void)f.remap(1, {0, 2}), Error);

  // seed_from must point at free slots.
  CHECK_THROWS_AS(
      (void)Predicate::ball_sup(f, BallSpec::uniform(1, 1.0), {}, {5}), Error);
}
