#include "tracelab/predicate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>

namespace tracelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stable per-node stream tag so quantifier evaluations are reproducible.
std::string next_node_tag(const char* prefix) {
  static std::atomic<std::uint64_t> counter{0};
  return std::string(prefix) + std::to_string(counter.fetch_add(1));
}

Mat letter_matrix(const Letter& l, const Tuple& x, int j) {
  const Element& e = l.var >= 0 ? x[l.var] : l.cst;
  if (l.star) return e.block(j).adjoint();
  return e.block(j);
}

}  // namespace

// ---------------------------------------------------------------------------
// Trace polynomial evaluation and gradient
// ---------------------------------------------------------------------------

Cx trace_poly_value(const TracePoly& p, const Tuple& x) {
  const TracialAlgebra& alg = *p.algebra;
  Cx total{0.0, 0.0};
  for (const Monomial& m : p.monos) {
    Cx tr{0.0, 0.0};
    for (int j = 0; j < alg.num_blocks(); ++j) {
      const int n = alg.block_dim(j);
      Mat prod = Mat::Identity(n, n);
      for (const Letter& l : m.letters) prod = prod * letter_matrix(l, x, j);
      tr += alg.weight_d(j) * prod.trace() / static_cast<double>(n);
    }
    total += m.coeff * tr;
  }
  return total;
}

namespace {

// L2 gradient of x -> Re(sum_m c_m tau(prod letters)).  For an occurrence of
// x_k at position p with cyclic complement S = L_{p+1}..L_q L_1..L_{p-1},
//   d/ds Re(c tau(.. (x_k + s h) ..)) = Re<h, conj(c) S*>,
// and for an occurrence of x_k*:
//   d/ds Re(c tau(.. (x_k + s h)* ..)) = Re<h, c S>.
// Im parts reduce to Re via Im(z) = Re(-i z).
Tuple trace_poly_gradient(const TracePoly& p, const Tuple& x, bool im_part) {
  const TracialAlgebra& alg = *p.algebra;
  Tuple g(p.algebra, p.arity);
  for (const Monomial& m : p.monos) {
    const Cx c = im_part ? Cx(0.0, -1.0) * m.coeff : m.coeff;
    const int len = static_cast<int>(m.letters.size());
    if (len == 0) continue;
    for (int j = 0; j < alg.num_blocks(); ++j) {
      const int n = alg.block_dim(j);
      std::vector<Mat> mats(len);
      for (int i = 0; i < len; ++i) mats[i] = letter_matrix(m.letters[i], x, j);
      // prefix[i] = L_1..L_i, suffix[i] = L_{i}..L_len (1-based, identity off
      // the ends).
      std::vector<Mat> prefix(len + 1), suffix(len + 2);
      prefix[0] = Mat::Identity(n, n);
      for (int i = 1; i <= len; ++i) prefix[i] = prefix[i - 1] * mats[i - 1];
      suffix[len + 1] = Mat::Identity(n, n);
      for (int i = len; i >= 1; --i) suffix[i] = mats[i - 1] * suffix[i + 1];
      for (int pidx = 1; pidx <= len; ++pidx) {
        const Letter& l = m.letters[pidx - 1];
        if (l.var < 0) continue;
        const Mat cyc = suffix[pidx + 1] * prefix[pidx - 1];
        if (l.star) {
          g[l.var].block(j) += c * cyc;
        } else {
          g[l.var].block(j) += std::conj(c) * cyc.adjoint();
        }
      }
    }
  }
  return g;
}

// Per-letter operator-norm bound on the given ball.
double letter_bound(const Letter& l, const BallSpec& ball) {
  return l.var >= 0 ? ball.radii[l.var] : op_norm(l.cst);
}

}  // namespace

// ---------------------------------------------------------------------------
// Ball-constrained projected gradient
// ---------------------------------------------------------------------------

BallOptResult ball_optimize(const std::function<double(const Tuple&)>& value,
                            const std::function<Tuple(const Tuple&)>& grad,
                            const AlgebraPtr& alg, const BallSpec& ball,
                            bool maximize, const InnerOptions& opt,
                            std::string_view tag,
                            const std::vector<Tuple>& extra_starts) {
  const int q = static_cast<int>(ball.radii.size());
  const double sign = maximize ? 1.0 : -1.0;
  Rng rng(opt.seed, tag);

  std::vector<Tuple> starts;
  starts.reserve(static_cast<std::size_t>(opt.restarts) + extra_starts.size());
  for (const Tuple& s : extra_starts) starts.push_back(project_ball(s, ball));
  starts.emplace_back(alg, q);
  while (static_cast<int>(starts.size()) < opt.restarts)
    starts.push_back(random_tuple_in_ball(alg, ball, rng));

  BallOptResult best;
  best.value = -sign * kInf;
  int iters_total = 0;

  for (std::size_t s = 0; s < starts.size(); ++s) {
    Tuple y = starts[s];
    double fy = value(y);
    double alpha = (0.1 + 0.5 * ball.l2_radius()) / (1.0 + l2_norm(grad(y)));
    ++iters_total;
    bool converged = false;
    double residual = kInf;
    bool flat_mode = false;
    double rho_best = kInf;
    Tuple y_best;
    int stall = 0;

    for (int it = 0; it < opt.budget; ++it) {
      Tuple g = grad(y);
      ++iters_total;
      Tuple trial = project_ball(y + (sign * alpha) * g, ball);
      const double step = l2_dist(trial, y);
      const double rho = step / alpha;
      residual = rho;
      if (rho <= opt.tol) {
        converged = true;
        break;
      }
      if (!flat_mode) {
        // Armijo phase: accept on sufficient increase of the objective.
        const double theta = 0.25 * step * step / alpha;
        if (theta <= 1e-12 * (1.0 + std::abs(fy))) {
          // Objective increments are below float resolution; switch to
          // fixed-step residual contraction (the gradient mapping is still
          // computable to full precision).
          flat_mode = true;
        } else {
          const double ft = value(trial);
          if (sign * (ft - fy) >= theta) {
            y = std::move(trial);
            fy = ft;
            alpha = std::min(alpha * 1.7, 1e8);
          } else {
            alpha *= 0.5;
            if (alpha < 1e-14) break;
          }
          continue;
        }
      }
      // Flat phase: fixed-step descent on exact gradients.  The residual of
      // a contracting iteration may legitimately overshoot between steps by
      // the condition number, so movement is not gated on improvement; only
      // a runaway (step too long) shrinks alpha and restarts from the best
      // point, and a long stretch without a new best residual means the
      // noise floor was reached.
      if (rho < rho_best) {
        rho_best = rho;
        y_best = y;
        stall = 0;
      } else if (++stall > 80) {
        break;
      }
      if (rho > 10.0 * rho_best) {
        alpha *= 0.5;
        y = y_best;
        if (alpha < 1e-14) break;
      } else {
        y = std::move(trial);
      }
    }

    if (flat_mode && !converged && rho_best < residual && y_best.arity() > 0) {
      y = y_best;
      residual = rho_best;
    }

    const double fv = value(y);
    ++iters_total;
    const double margin = std::isfinite(best.value)
                              ? 1e-12 * (1.0 + std::abs(best.value))
                              : 0.0;
    const bool better =
        !std::isfinite(best.value) || sign * (fv - best.value) > margin ||
        (std::abs(fv - best.value) <= margin && converged && !best.converged);
    if (better) {
      best.value = fv;
      best.arg = y;
      best.converged = converged;
      best.residual = residual;
    }
  }

  best.iters = iters_total;
  best.boundary = false;
  for (int k = 0; k < q; ++k)
    if (op_norm(best.arg[k]) >= ball.radii[k] - 1e-6 * (1.0 + ball.radii[k]))
      best.boundary = true;
  return best;
}

// ---------------------------------------------------------------------------
// Predicate nodes
// ---------------------------------------------------------------------------

namespace detail {

enum class PredKind {
  kTraceRe,
  kTraceIm,
  kConst,
  kAdd,
  kMul,
  kScale,
  kAbs,
  kMax,
  kMin,
  kSup,
  kInf
};

struct PredNode {
  PredKind kind;
  int arity = 0;              // free arity
  AlgebraPtr alg;
  std::vector<Predicate> kids;
  TracePoly poly;             // kTraceRe / kTraceIm
  double scalar = 0.0;        // kConst value or kScale factor
  BallSpec ball;              // kSup / kInf
  InnerOptions opt;           // kSup / kInf
  std::vector<int> seed_from; // kSup / kInf
  std::string tag;            // rng stream tag for quantifiers
  PredFlags flags;            // declared regularity

  // Same-input solve cache: an evaluation followed by a gradient at the same
  // free point (the common pattern inside nested optimizations) runs one
  // inner optimization instead of two.  Recomputation would return exactly
  // the cached result, so values stay pure; single-threaded use.
  mutable Eigen::VectorXd memo_key;
  mutable BallOptResult memo_result;
  mutable bool memo_valid = false;

  bool is_quantifier() const {
    return kind == PredKind::kSup || kind == PredKind::kInf;
  }
  BallSpec extended_ball(const BallSpec& free) const {
    BallSpec ext = free;
    ext.radii.insert(ext.radii.end(), ball.radii.begin(), ball.radii.end());
    return ext;
  }
};

}  // namespace detail

using detail::PredKind;
using detail::PredNode;

namespace detail {
Predicate make_predicate(std::shared_ptr<const PredNode> n) {
  return Predicate(std::move(n));
}
}  // namespace detail

namespace {

Predicate wrap(std::shared_ptr<const PredNode> n) {
  return detail::make_predicate(std::move(n));
}

std::shared_ptr<PredNode> make_node(PredKind k) {
  auto n = std::make_shared<PredNode>();
  n->kind = k;
  return n;
}

void require_same_context(const Predicate& a, const Predicate& b) {
  if (!a.valid() || !b.valid())
    throw Error(Errc::bad_input, "predicate: empty operand");
  if (a.arity() != b.arity() ||
      !a.algebra()->same_structure(*b.algebra()))
    throw Error(Errc::bad_input,
                "predicate: operands have mismatched arity or algebra");
}

Predicate binary(PredKind k, const Predicate& a, const Predicate& b) {
  require_same_context(a, b);
  auto n = make_node(k);
  n->arity = a.arity();
  n->alg = a.algebra();
  n->kids = {a, b};
  return wrap(std::move(n));
}

}  // namespace

// Builders -------------------------------------------------------------------

namespace {
Predicate make_trace(PredKind k, TracePoly p) {
  if (!p.algebra) throw Error(Errc::bad_input, "trace polynomial: no algebra");
  for (const Monomial& m : p.monos)
    for (const Letter& l : m.letters) {
      if (l.var >= p.arity)
        throw Error(Errc::bad_input, "trace polynomial: variable out of range");
      if (l.var < 0 && (!l.cst.algebra() ||
                        !l.cst.algebra()->same_structure(*p.algebra)))
        throw Error(Errc::bad_input,
                    "trace polynomial: constant letter from another algebra");
    }
  auto n = make_node(k);
  n->arity = p.arity;
  n->alg = p.algebra;
  n->poly = std::move(p);
  return wrap(std::move(n));
}
}  // namespace

Predicate Predicate::trace_re(TracePoly p) {
  return make_trace(PredKind::kTraceRe, std::move(p));
}

Predicate Predicate::trace_im(TracePoly p) {
  return make_trace(PredKind::kTraceIm, std::move(p));
}

Predicate Predicate::constant(AlgebraPtr alg, int arity, double value) {
  auto n = make_node(PredKind::kConst);
  n->arity = arity;
  n->alg = std::move(alg);
  n->scalar = value;
  return wrap(std::move(n));
}

Predicate Predicate::inner_re(const Tuple& a) {
  TracePoly p;
  p.algebra = a.algebra();
  p.arity = a.arity();
  for (int k = 0; k < a.arity(); ++k) {
    Monomial m;
    m.coeff = Cx{1.0, 0.0};
    m.letters = {Letter::variable(k, true), Letter::constant(a[k])};
    p.monos.push_back(std::move(m));
  }
  return trace_re(std::move(p));
}

Predicate Predicate::squared_norm(AlgebraPtr alg, int arity) {
  TracePoly p;
  p.algebra = std::move(alg);
  p.arity = arity;
  for (int k = 0; k < arity; ++k) {
    Monomial m;
    m.coeff = Cx{1.0, 0.0};
    m.letters = {Letter::variable(k, true), Letter::variable(k)};
    p.monos.push_back(std::move(m));
  }
  return trace_re(std::move(p));
}

Predicate Predicate::squared_dist(AlgebraPtr alg, int arity, int i0, int j0,
                                  int m) {
  if (i0 < 0 || j0 < 0 || i0 + m > arity || j0 + m > arity)
    throw Error(Errc::bad_input, "squared_dist: slot ranges out of bounds");
  TracePoly p;
  p.algebra = std::move(alg);
  p.arity = arity;
  for (int k = 0; k < m; ++k) {
    const int i = i0 + k, j = j0 + k;
    auto add_mono = [&p](Cx c, int u, int v) {
      Monomial mono;
      mono.coeff = c;
      mono.letters = {Letter::variable(u, true), Letter::variable(v)};
      p.monos.push_back(std::move(mono));
    };
    // ||x_i - x_j||^2 = tau(x_i* x_i) - tau(x_i* x_j) - tau(x_j* x_i)
    //                   + tau(x_j* x_j)
    add_mono({1.0, 0.0}, i, i);
    add_mono({-1.0, 0.0}, i, j);
    add_mono({-1.0, 0.0}, j, i);
    add_mono({1.0, 0.0}, j, j);
  }
  return trace_re(std::move(p));
}

Predicate operator+(const Predicate& a, const Predicate& b) {
  return binary(PredKind::kAdd, a, b);
}

Predicate operator-(const Predicate& a, const Predicate& b) {
  return binary(PredKind::kAdd, a, Predicate::scale(-1.0, b));
}

Predicate Predicate::mul(const Predicate& a, const Predicate& b) {
  return binary(PredKind::kMul, a, b);
}

Predicate Predicate::scale(double s, const Predicate& a) {
  if (!a.valid()) throw Error(Errc::bad_input, "predicate: empty operand");
  auto n = make_node(PredKind::kScale);
  n->arity = a.arity();
  n->alg = a.algebra();
  n->kids = {a};
  n->scalar = s;
  return wrap(std::move(n));
}

Predicate Predicate::abs(const Predicate& a) {
  if (!a.valid()) throw Error(Errc::bad_input, "predicate: empty operand");
  auto n = make_node(PredKind::kAbs);
  n->arity = a.arity();
  n->alg = a.algebra();
  n->kids = {a};
  return wrap(std::move(n));
}

Predicate Predicate::max(const Predicate& a, const Predicate& b) {
  return binary(PredKind::kMax, a, b);
}

Predicate Predicate::min(const Predicate& a, const Predicate& b) {
  return binary(PredKind::kMin, a, b);
}

Predicate Predicate::max_of(std::vector<Predicate> parts) {
  if (parts.empty()) throw Error(Errc::bad_input, "max_of: no operands");
  // Balanced fold keeps the tree depth logarithmic.
  while (parts.size() > 1) {
    std::vector<Predicate> next;
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
      next.push_back(max(parts[i], parts[i + 1]));
    if (parts.size() % 2 == 1) next.push_back(parts.back());
    parts = std::move(next);
  }
  return parts.front();
}

namespace {
Predicate make_quantifier(PredKind k, Predicate child, BallSpec ball,
                          InnerOptions opt, std::vector<int> seed_from,
                          const char* prefix) {
  if (!child.valid()) throw Error(Errc::bad_input, "quantifier: empty child");
  const int q = static_cast<int>(ball.radii.size());
  if (q < 1 || child.arity() < q)
    throw Error(Errc::bad_input, "quantifier: ball arity exceeds child arity");
  const int free = child.arity() - q;
  if (!seed_from.empty()) {
    if (static_cast<int>(seed_from.size()) != q)
      throw Error(Errc::bad_input, "quantifier: seed_from arity mismatch");
    for (int s : seed_from)
      if (s < 0 || s >= free)
        throw Error(Errc::bad_input, "quantifier: seed_from slot out of range");
  }
  auto n = make_node(k);
  n->arity = free;
  n->alg = child.algebra();
  n->kids = {std::move(child)};
  n->ball = std::move(ball);
  n->opt = opt;
  n->seed_from = std::move(seed_from);
  n->tag = next_node_tag(prefix);
  return wrap(std::move(n));
}
}  // namespace

Predicate Predicate::ball_sup(Predicate child, BallSpec ball, InnerOptions opt,
                              std::vector<int> seed_from) {
  return make_quantifier(PredKind::kSup, std::move(child), std::move(ball),
                         opt, std::move(seed_from), "sup");
}

Predicate Predicate::ball_inf(Predicate child, BallSpec ball, InnerOptions opt,
                              std::vector<int> seed_from) {
  return make_quantifier(PredKind::kInf, std::move(child), std::move(ball),
                         opt, std::move(seed_from), "inf");
}

Predicate Predicate::remap(int new_arity,
                           const std::vector<int>& slot_of_old) const {
  if (!node_) throw Error(Errc::bad_input, "remap: empty predicate");
  const PredNode& n = *node_;
  if (static_cast<int>(slot_of_old.size()) != n.arity)
    throw Error(Errc::bad_input, "remap: slot map arity mismatch");
  for (int s : slot_of_old)
    if (s < 0 || s >= new_arity)
      throw Error(Errc::bad_input, "remap: target slot out of range");

  auto out = std::make_shared<PredNode>(n);
  out->arity = new_arity;
  if (n.kind == PredKind::kTraceRe || n.kind == PredKind::kTraceIm) {
    out->poly.arity = new_arity;
    for (Monomial& m : out->poly.monos)
      for (Letter& l : m.letters)
        if (l.var >= 0) l.var = slot_of_old[l.var];
  } else if (n.is_quantifier()) {
    const int q = static_cast<int>(n.ball.radii.size());
    std::vector<int> child_map = slot_of_old;
    for (int i = 0; i < q; ++i) child_map.push_back(new_arity + i);
    out->kids = {n.kids[0].remap(new_arity + q, child_map)};
    for (int& s : out->seed_from) s = slot_of_old[s];
  } else {
    out->kids.clear();
    for (const Predicate& kid : n.kids)
      out->kids.push_back(kid.remap(new_arity, slot_of_old));
  }
  return wrap(std::move(out));
}

int Predicate::arity() const { return node_ ? node_->arity : 0; }

const PredFlags& Predicate::flags() const {
  static const PredFlags kNone;
  return node_ ? node_->flags : kNone;
}

Predicate Predicate::with_flags(PredFlags f) const {
  if (!node_) throw Error(Errc::bad_input, "with_flags: empty predicate");
  auto out = std::make_shared<PredNode>(*node_);
  out->flags = f;
  return wrap(std::move(out));
}

const AlgebraPtr& Predicate::algebra() const {
  static const AlgebraPtr kNull;
  return node_ ? node_->alg : kNull;
}

// Evaluation ------------------------------------------------------------------

namespace {

// Runs the inner optimization of a quantifier node at free point x.
BallOptResult solve_quantifier(const PredNode& n, const Tuple& x) {
  const Eigen::VectorXd key = l2_rvec(x);
  if (n.memo_valid && n.memo_key.size() == key.size() &&
      (n.memo_key.array() == key.array()).all()) {
    return n.memo_result;
  }
  const Predicate& child = n.kids[0];
  const int q = static_cast<int>(n.ball.radii.size());
  auto value_fn = [&](const Tuple& y) {
    return child.eval(Tuple::concat(x, y));
  };
  auto grad_fn = [&](const Tuple& y) {
    return child.gradient(Tuple::concat(x, y)).slice(n.arity, q);
  };
  std::vector<Tuple> extra;
  if (!n.seed_from.empty()) {
    Tuple s(n.alg, q);
    for (int i = 0; i < q; ++i) s[i] = x[n.seed_from[i]];
    extra.push_back(std::move(s));
  }
  BallOptResult res = ball_optimize(value_fn, grad_fn, n.alg, n.ball,
                                    n.kind == PredKind::kSup, n.opt, n.tag,
                                    extra);
  n.memo_key = key;
  n.memo_result = res;
  n.memo_valid = true;
  return res;
}

}  // namespace

EvalInfo Predicate::eval_full(const Tuple& x) const {
  if (!node_) throw Error(Errc::bad_input, "eval: empty predicate");
  const PredNode& n = *node_;
  switch (n.kind) {
    case PredKind::kTraceRe:
      return {trace_poly_value(n.poly, x).real(), true, false};
    case PredKind::kTraceIm:
      return {trace_poly_value(n.poly, x).imag(), true, false};
    case PredKind::kConst:
      return {n.scalar, true, false};
    case PredKind::kAdd: {
      EvalInfo a = n.kids[0].eval_full(x), b = n.kids[1].eval_full(x);
      return {a.value + b.value, a.converged && b.converged,
              a.boundary || b.boundary};
    }
    case PredKind::kMul: {
      EvalInfo a = n.kids[0].eval_full(x), b = n.kids[1].eval_full(x);
      return {a.value * b.value, a.converged && b.converged,
              a.boundary || b.boundary};
    }
    case PredKind::kScale: {
      EvalInfo a = n.kids[0].eval_full(x);
      return {n.scalar * a.value, a.converged, a.boundary};
    }
    case PredKind::kAbs: {
      EvalInfo a = n.kids[0].eval_full(x);
      return {std::abs(a.value), a.converged, a.boundary};
    }
    case PredKind::kMax:
    case PredKind::kMin: {
      EvalInfo a = n.kids[0].eval_full(x), b = n.kids[1].eval_full(x);
      const bool take_a = n.kind == PredKind::kMax ? a.value >= b.value
                                                   : a.value <= b.value;
      EvalInfo out = take_a ? a : b;
      out.converged = a.converged && b.converged;
      out.boundary = a.boundary || b.boundary;
      return out;
    }
    case PredKind::kSup:
    case PredKind::kInf: {
      BallOptResult res = solve_quantifier(n, x);
      EvalInfo at = n.kids[0].eval_full(Tuple::concat(x, res.arg));
      return {res.value, res.converged && at.converged,
              res.boundary || at.boundary};
    }
  }
  throw Error(Errc::invariant, "eval: unknown node kind");
}

Tuple Predicate::gradient(const Tuple& x) const {
  if (!node_) throw Error(Errc::bad_input, "gradient: empty predicate");
  const PredNode& n = *node_;
  switch (n.kind) {
    case PredKind::kTraceRe:
      return trace_poly_gradient(n.poly, x, false);
    case PredKind::kTraceIm:
      return trace_poly_gradient(n.poly, x, true);
    case PredKind::kConst:
      return Tuple(n.alg, n.arity);
    case PredKind::kAdd:
      return n.kids[0].gradient(x) + n.kids[1].gradient(x);
    case PredKind::kMul: {
      const double va = n.kids[0].eval(x), vb = n.kids[1].eval(x);
      return vb * n.kids[0].gradient(x) + va * n.kids[1].gradient(x);
    }
    case PredKind::kScale:
      return n.scalar * n.kids[0].gradient(x);
    case PredKind::kAbs: {
      const double v = n.kids[0].eval(x);
      const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      return s * n.kids[0].gradient(x);
    }
    case PredKind::kMax:
    case PredKind::kMin: {
      const double va = n.kids[0].eval(x), vb = n.kids[1].eval(x);
      const bool take_a = n.kind == PredKind::kMax ? va >= vb : va <= vb;
      return n.kids[take_a ? 0 : 1].gradient(x);
    }
    case PredKind::kSup:
    case PredKind::kInf: {
      // Envelope rule at the inner witness.
      BallOptResult res = solve_quantifier(n, x);
      return n.kids[0].gradient(Tuple::concat(x, res.arg)).slice(0, n.arity);
    }
  }
  throw Error(Errc::invariant, "gradient: unknown node kind");
}

// Symbolic bounds -------------------------------------------------------------

namespace {

double poly_value_bound(const TracePoly& p, const BallSpec& ball) {
  double v = 0.0;
  for (const Monomial& m : p.monos) {
    double prod = std::abs(m.coeff);
    for (const Letter& l : m.letters) prod *= letter_bound(l, ball);
    v += prod;
  }
  return v;
}

std::vector<double> poly_lip_by_var(const TracePoly& p, const BallSpec& ball) {
  std::vector<double> lip(static_cast<std::size_t>(p.arity), 0.0);
  for (const Monomial& m : p.monos) {
    const int len = static_cast<int>(m.letters.size());
    for (int pos = 0; pos < len; ++pos) {
      const Letter& l = m.letters[pos];
      if (l.var < 0) continue;
      double prod = std::abs(m.coeff);
      for (int o = 0; o < len; ++o)
        if (o != pos) prod *= letter_bound(m.letters[o], ball);
      lip[static_cast<std::size_t>(l.var)] += prod;
    }
  }
  return lip;
}

double poly_curvature(const TracePoly& p, const BallSpec& ball) {
  double h = 0.0;
  for (const Monomial& m : p.monos) {
    const int len = static_cast<int>(m.letters.size());
    for (int a = 0; a < len; ++a) {
      if (m.letters[a].var < 0) continue;
      for (int b = 0; b < len; ++b) {
        if (b == a || m.letters[b].var < 0) continue;
        double prod = std::abs(m.coeff);
        for (int o = 0; o < len; ++o)
          if (o != a && o != b) prod *= letter_bound(m.letters[o], ball);
        h += prod;
      }
    }
  }
  return h;
}

double tuple_combine(const std::vector<double>& lip, int arity) {
  double s = 0.0;
  for (int k = 0; k < arity; ++k) s += lip[static_cast<std::size_t>(k)] *
                                       lip[static_cast<std::size_t>(k)];
  return std::sqrt(s);
}

}  // namespace

std::vector<double> Predicate::lip_by_var(const BallSpec& ball) const {
  const PredNode& n = *node_;
  switch (n.kind) {
    case PredKind::kTraceRe:
    case PredKind::kTraceIm:
      return poly_lip_by_var(n.poly, ball);
    case PredKind::kConst:
      return std::vector<double>(static_cast<std::size_t>(n.arity), 0.0);
    case PredKind::kAdd: {
      auto a = n.kids[0].lip_by_var(ball), b = n.kids[1].lip_by_var(ball);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
      return a;
    }
    case PredKind::kMul: {
      auto a = n.kids[0].lip_by_var(ball), b = n.kids[1].lip_by_var(ball);
      const double va = n.kids[0].value_bound(ball);
      const double vb = n.kids[1].value_bound(ball);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = a[k] * vb + va * b[k];
      return a;
    }
    case PredKind::kScale: {
      auto a = n.kids[0].lip_by_var(ball);
      for (double& v : a) v *= std::abs(n.scalar);
      return a;
    }
    case PredKind::kAbs:
      return n.kids[0].lip_by_var(ball);
    case PredKind::kMax:
    case PredKind::kMin: {
      auto a = n.kids[0].lip_by_var(ball), b = n.kids[1].lip_by_var(ball);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::max(a[k], b[k]);
      return a;
    }
    case PredKind::kSup:
    case PredKind::kInf: {
      auto a = n.kids[0].lip_by_var(n.extended_ball(ball));
      a.resize(static_cast<std::size_t>(n.arity));
      return a;
    }
  }
  throw Error(Errc::invariant, "lipschitz: unknown node kind");
}

double Predicate::value_bound(const BallSpec& ball) const {
  if (!node_) throw Error(Errc::bad_input, "value_bound: empty predicate");
  const PredNode& n = *node_;
  switch (n.kind) {
    case PredKind::kTraceRe:
    case PredKind::kTraceIm:
      return poly_value_bound(n.poly, ball);
    case PredKind::kConst:
      return std::abs(n.scalar);
    case PredKind::kAdd:
      return n.kids[0].value_bound(ball) + n.kids[1].value_bound(ball);
    case PredKind::kMul:
      return n.kids[0].value_bound(ball) * n.kids[1].value_bound(ball);
    case PredKind::kScale:
      return std::abs(n.scalar) * n.kids[0].value_bound(ball);
    case PredKind::kAbs:
      return n.kids[0].value_bound(ball);
    case PredKind::kMax:
    case PredKind::kMin:
      return std::max(n.kids[0].value_bound(ball),
                      n.kids[1].value_bound(ball));
    case PredKind::kSup:
    case PredKind::kInf:
      return n.kids[0].value_bound(n.extended_ball(ball));
  }
  throw Error(Errc::invariant, "value_bound: unknown node kind");
}

double Predicate::lipschitz(const BallSpec& ball) const {
  if (!node_) throw Error(Errc::bad_input, "lipschitz: empty predicate");
  return tuple_combine(lip_by_var(ball), node_->arity);
}

double Predicate::curvature(const BallSpec& ball) const {
  if (!node_) throw Error(Errc::bad_input, "curvature: empty predicate");
  const PredNode& n = *node_;
  switch (n.kind) {
    case PredKind::kTraceRe:
    case PredKind::kTraceIm:
      return poly_curvature(n.poly, ball);
    case PredKind::kConst:
      return 0.0;
    case PredKind::kAdd:
      return n.kids[0].curvature(ball) + n.kids[1].curvature(ball);
    case PredKind::kMul:
      return n.kids[0].curvature(ball) * n.kids[1].value_bound(ball) +
             2.0 * n.kids[0].lipschitz(ball) * n.kids[1].lipschitz(ball) +
             n.kids[0].value_bound(ball) * n.kids[1].curvature(ball);
    case PredKind::kScale:
      return std::abs(n.scalar) * n.kids[0].curvature(ball);
    case PredKind::kAbs:
    case PredKind::kMax:
    case PredKind::kMin:
    case PredKind::kSup:
    case PredKind::kInf:
      return kInf;
  }
  throw Error(Errc::invariant, "curvature: unknown node kind");
}

}  // namespace tracelab
