#include "tracelab/closure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace tracelab {

BlockClassPartition block_class_partition(const Inclusion& inc) {
  const int I = inc.sub->num_blocks();
  const int J = inc.amb->num_blocks();
  BlockClassPartition part;
  part.class_of.assign(J, -1);
  for (int j = 0; j < J; ++j) {
    if (part.class_of[j] >= 0) continue;
    int cls = part.num_classes();
    part.classes.push_back({j});
    part.class_of[j] = cls;
    for (int j2 = j + 1; j2 < J; ++j2) {
      if (part.class_of[j2] >= 0) continue;
      bool same = inc.amb->block_dim(j) == inc.amb->block_dim(j2) &&
                  inc.amb->weight(j) == inc.amb->weight(j2);
      for (int i = 0; same && i < I; ++i)
        same = inc.mult[i][j] == inc.mult[i][j2];
      if (same) {
        part.classes[cls].push_back(j2);
        part.class_of[j2] = cls;
      }
    }
  }
  return part;
}

ClosureResult dcl_finite(const Inclusion& inc) {
  ClosureResult res;
  res.partition = block_class_partition(inc);
  const int I = inc.sub->num_blocks();

  // Spanning family p_C * iota(e) over sub matrix units e; the combinatorial
  // dimension counts each sub block i that survives into class C.
  std::vector<Element> family;
  for (const std::vector<int>& cls : res.partition.classes) {
    const int j0 = cls.front();
    for (int i = 0; i < I; ++i) {
      if (inc.mult[i][j0] == 0) continue;  // iota kills block i on this class
      res.dim_formula += inc.sub->block_dim(i) * inc.sub->block_dim(i);
      const int m = inc.sub->block_dim(i);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
          Element e(inc.sub);
          e.block(i)(r, c) = Cx(1, 0);
          Element img = embed(inc, e);
          // apply p_C: zero out blocks outside the class
          Element cut(inc.amb);
          for (int j : cls) cut.block(j) = img.block(j);
          family.push_back(cut);
        }
    }
  }

  std::vector<Element> onb = orthonormalize(family, 1e-10);
  res.dim = static_cast<int>(onb.size());
  res.algebra = make_subalgebra(onb);
  return res;
}

Subalgebra acl_finite(const AlgebraPtr& amb) {
  std::vector<Element> units;
  for (int j = 0; j < amb->num_blocks(); ++j)
    for (int r = 0; r < amb->block_dim(j); ++r)
      for (int c = 0; c < amb->block_dim(j); ++c) {
        Element e(amb);
        e.block(j)(r, c) = Cx(1, 0);
        units.push_back(e);
      }
  return make_subalgebra(units);
}

namespace {

// Matrix of a linear map on the algebra in L2 coordinates.
Eigen::MatrixXcd map_matrix(const AlgebraPtr& alg,
                            const std::function<Element(const Element&)>& f) {
  const int D = alg->dim();
  Eigen::MatrixXcd M(D, D);
  for (int d = 0; d < D; ++d) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(D);
    e(d) = Cx(1, 0);
    M.col(d) = l2_vec(f(l2_unvec(alg, e)));
  }
  return M;
}

// Orthonormal basis of the kernel of a stacked constraint map, via an SVD
// of the stack itself.  (Eigendecomposing the normal matrix L* L instead
// would square the singular values and push a 1e-8 threshold below the
// eigensolver's noise floor.)
std::vector<Element> kernel_basis(const AlgebraPtr& alg,
                                  const Eigen::MatrixXcd& stacked,
                                  double threshold) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  std::vector<Element> basis;
  for (int i = 0; i < svd.matrixV().cols(); ++i) {
    double sv = i < s.size() ? s(i) : 0.0;
    if (sv <= threshold) basis.push_back(l2_unvec(alg, svd.matrixV().col(i)));
  }
  return basis;
}

}  // namespace

std::vector<Element> relative_commutant(const Subalgebra& A) {
  const AlgebraPtr alg = A.ambient;
  const int D = alg->dim();
  const int m = static_cast<int>(A.onb.size());
  Eigen::MatrixXcd stacked(m * D, D);
  for (int i = 0; i < m; ++i) {
    const Element& b = A.onb[i];
    stacked.middleRows(i * D, D) = map_matrix(
        alg, [&](const Element& x) { return x * b - b * x; });
  }
  return kernel_basis(alg, stacked, 1e-10);
}

std::vector<Element> relative_bicommutant(const Subalgebra& A) {
  std::vector<Element> comm = relative_commutant(A);
  return relative_commutant(make_subalgebra(comm));
}

std::vector<Element> automorphism_fixed_oracle(const Inclusion& inc,
                                               const FixedPointOptions& opt) {
  const AlgebraPtr amb = inc.amb;
  const int D = amb->dim();
  const BlockClassPartition part = block_class_partition(inc);
  const Subalgebra image = embedded_subalgebra(inc);
  const std::vector<Element> comm = relative_commutant(image);

  Rng rng(opt.seed, "fixedpoint");
  Eigen::MatrixXcd stacked(opt.samples * D, D);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(D, D);

  for (int s = 0; s < opt.samples; ++s) {
    // Random permutation of the blocks within each equivalence class.
    std::vector<int> dest(amb->num_blocks());
    std::iota(dest.begin(), dest.end(), 0);
    for (const std::vector<int>& cls : part.classes) {
      std::vector<int> perm(cls.begin(), cls.end());
      for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_int(0, i)]);
      for (std::size_t i = 0; i < cls.size(); ++i) dest[cls[i]] = perm[i];
    }
    // Self-adjoint h in the relative commutant and its unitary exp(i h).
    Element w(amb);
    for (const Element& c : comm) w += rng.gaussian_cx() * c;
    Element h = Cx(0.5, 0) * (w + w.adjoint());
    Element u(amb);
    for (int j = 0; j < amb->num_blocks(); ++j) {
      Eigen::SelfAdjointEigenSolver<Mat> es(h.block(j));
      Eigen::VectorXcd phases =
          (Cx(0, 1) * es.eigenvalues().cast<Cx>().array()).exp().matrix();
      u.block(j) = es.eigenvectors() * phases.asDiagonal() *
                   es.eigenvectors().adjoint();
    }

    auto theta = [&](const Element& x) {
      Element permuted(amb);
      for (int j = 0; j < amb->num_blocks(); ++j)
        permuted.block(dest[j]) = x.block(j);
      return u * permuted * u.adjoint();
    };
    stacked.middleRows(s * D, D) = map_matrix(amb, theta) - id;
  }

  return kernel_basis(amb, stacked, opt.threshold);
}

double span_containment_gap(const std::vector<Element>& basis_a,
                            const std::vector<Element>& onb_b) {
  double worst = 0.0;
  for (const Element& a : basis_a) {
    double n = l2_norm(a);
    if (n == 0.0) continue;
    worst = std::max(worst, span_residual(onb_b, (1.0 / n) * a));
  }
  return worst;
}

Inclusion random_inclusion(Rng& rng, int max_total_dim) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int I = rng.uniform_int(1, 3);
    std::vector<int> m(I);
    for (int& mi : m) mi = rng.uniform_int(1, 3);
    int Jbase = rng.uniform_int(1, 3);
    std::vector<std::vector<int>> cols;  // multiplicity columns k(., j)
    std::vector<int> w;                  // integer weight numerators
    for (int j = 0; j < Jbase; ++j) {
      std::vector<int> col(I);
      bool nonzero = false;
      for (int i = 0; i < I; ++i) {
        col[i] = rng.uniform_int(0, 2);
        nonzero = nonzero || col[i] > 0;
      }
      if (!nonzero) col[rng.uniform_int(0, I - 1)] = 1;
      cols.push_back(col);
      w.push_back(rng.uniform_int(1, 6));
      // Duplicate the column (with equal weight) about half the time so the
      // class partition is nontrivial.
      if (rng.uniform() < 0.5) {
        cols.push_back(col);
        w.push_back(w.back());
      }
    }
    const int J = static_cast<int>(cols.size());
    // every sub block must embed somewhere
    std::vector<int> rowsum(I, 0);
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i) rowsum[i] += cols[j][i];
    if (std::any_of(rowsum.begin(), rowsum.end(), [](int r) { return r == 0; }))
      continue;

    std::vector<int> n(J);
    int total = 0;
    for (int j = 0; j < J; ++j) {
      n[j] = 0;
      for (int i = 0; i < I; ++i) n[j] += cols[j][i] * m[i];
      total += n[j] * n[j];
    }
    if (total > max_total_dim) continue;

    long long W = std::accumulate(w.begin(), w.end(), 0ll);
    std::vector<Block> ablocks(J);
    for (int j = 0; j < J; ++j) ablocks[j] = Block{n[j], Rational(w[j], W)};
    AlgebraPtr amb = make_algebra(ablocks);

    // Sub weights follow from trace compatibility and sum to 1 automatically.
    std::vector<Block> sblocks(I);
    for (int i = 0; i < I; ++i) {
      Rational alpha(0);
      for (int j = 0; j < J; ++j)
        alpha += Rational(cols[j][i]) * amb->weight(j) / Rational(n[j]);
      sblocks[i] = Block{m[i], Rational(m[i]) * alpha};
    }
    AlgebraPtr sub = make_algebra(sblocks);

    std::vector<std::vector<int>> mult(I, std::vector<int>(J));
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) mult[i][j] = cols[j][i];
    return make_inclusion(sub, amb, std::move(mult));
  }
  throw Error(Errc::budget, "random_inclusion failed to draw an instance");
}

}  // namespace tracelab
