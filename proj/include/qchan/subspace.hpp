#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qchan/complex_matrix.hpp"
#include "qchan/hermitian_eigen.hpp"
#include "qchan/measure.hpp"
#include "qchan/rng.hpp"
#include "qchan/schur.hpp"

namespace qchan {

/// Orthonormal basis of a common invariant subspace E with the measured
/// invariance residual max_i |(Id - Pi_E) K_i Pi_E|.
struct SubspaceBasis {
  ComplexMatrix basis;  // k x d, orthonormal columns
  double invariance_residual = 0.0;

  int subspace_dim() const { return basis.cols(); }
  int ambient_dim() const { return basis.rows(); }
};

namespace detail {

/// Gram-Schmidt a vector against orthonormal columns; returns the residual
/// norm and (if kept) appends the normalized remainder.
inline double orthogonal_residual(const std::vector<CVector>& basis, CVector& y) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) {
      const Complex c = vdot(b, y);
      for (size_t i = 0; i < y.size(); ++i) y[i] -= c * b[i];
    }
  return vnorm(y);
}

inline ComplexMatrix basis_to_matrix(const std::vector<CVector>& basis, int k) {
  ComplexMatrix m(k, static_cast<int>(basis.size()));
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < k; ++i) m(i, j) = basis[j][i];
  return m;
}

inline ComplexMatrix projector_onto(const std::vector<CVector>& basis, int k) {
  ComplexMatrix p(k, k);
  for (const auto& b : basis) p += outer(b, b);
  return p;
}

}  // namespace detail

inline double invariance_residual(const KrausFamily& fam, const ComplexMatrix& basis) {
  const int k = fam.dim;
  const int d = basis.cols();
  std::vector<CVector> cols;
  for (int j = 0; j < d; ++j) {
    CVector c(k);
    for (int i = 0; i < k; ++i) c[i] = basis(i, j);
    cols.push_back(std::move(c));
  }
  const ComplexMatrix pi = detail::projector_onto(cols, k);
  const ComplexMatrix off = ComplexMatrix::identity(k) - pi;
  double res = 0.0;
  for (const auto& pr : fam.pairs) {
    // |(Id - Pi) K Pi| equals the largest singular value of the k x d image
    // of the basis, cheaper than the full k x k product for many atoms.
    const ComplexMatrix img = off * (pr.op * basis);
    if (d == 1) {
      double n2 = 0.0;
      for (int i = 0; i < k; ++i) n2 += std::norm(img(i, 0));
      res = std::max(res, std::sqrt(n2));
    } else {
      const auto gram = hermitian_eigen(hermitize(adjoint(img) * img));
      res = std::max(res, std::sqrt(std::max(0.0, gram.eigenvalues.back())));
    }
  }
  return res;
}

/// Searches for proper nontrivial subspaces invariant under every K_i.
/// Seeds are the eigenvectors of each Kraus operator and of random real
/// combinations; each seed is closed under the family action (orbit span
/// with a rank cut) and minimal subspaces are kept. An empty result is a
/// heuristic certificate that only trivial invariant subspaces exist.
inline std::vector<SubspaceBasis> invariant_subspace_search(const KrausFamily& fam,
                                                            double tol = 1e-9,
                                                            int random_seeds = 20,
                                                            uint64_t seed = 0x5eedULL) {
  const int k = fam.dim;
  if (k == 1) return {};
  double scale = 0.0;
  for (const auto& p : fam.pairs) scale = std::max(scale, op_norm(p.op));
  if (scale == 0.0) return {};
  const double cut = tol * scale / (2.0 * std::sqrt(static_cast<double>(k)));

  // Collect seed vectors. Large families are stride-sampled for the
  // per-operator eigenvector seeds (proportional atoms repeat the same
  // eigenvectors); the random combinations always mix every operator.
  std::vector<CVector> seeds;
  auto add_eigvecs = [&](const ComplexMatrix& m) {
    const auto sd = schur_decompose(m);
    for (int j = 0; j < k; ++j) seeds.push_back(eigenvector_from_schur(sd, j));
  };
  constexpr size_t kSeedAtomCap = 64;
  const size_t stride = std::max<size_t>(1, fam.size() / kSeedAtomCap);
  for (size_t i = 0; i < fam.size(); i += stride) add_eigvecs(fam.pairs[i].op);
  RngStream rng(seed);
  for (int t = 0; t < random_seeds; ++t) {
    ComplexMatrix combo(k, k);
    for (const auto& p : fam.pairs) combo += p.op * (rng.uniform() - 0.5);
    add_eigvecs(combo);
  }

  // Orbit closures, deduplicated before the (atom-count proportional)
  // residual certification.
  std::vector<ComplexMatrix> candidates;
  auto subspace_covers = [&](const ComplexMatrix& big, const ComplexMatrix& small,
                             double tol_cover) {
    // small subseteq big iff Pi_big fixes every column of small.
    ComplexMatrix pi(k, k);
    for (int j = 0; j < big.cols(); ++j) {
      CVector c(k);
      for (int i = 0; i < k; ++i) c[i] = big(i, j);
      pi += outer(c, c);
    }
    double dev = 0.0;
    for (int j = 0; j < small.cols(); ++j) {
      CVector c(k);
      for (int i = 0; i < k; ++i) c[i] = small(i, j);
      const CVector pc = mat_vec(pi, c);
      CVector diff(k);
      for (int i = 0; i < k; ++i) diff[i] = pc[i] - c[i];
      dev = std::max(dev, vnorm(diff));
    }
    return dev <= tol_cover * std::sqrt(static_cast<double>(k));
  };

  for (const auto& s : seeds) {
    std::vector<CVector> basis;
    CVector first = s;
    const double n0 = vnorm(first);
    if (n0 < 1e-14) continue;
    vscale(first, Complex(1.0 / n0, 0.0));
    basis.push_back(std::move(first));
    bool grew = true;
    while (grew && static_cast<int>(basis.size()) < k) {
      grew = false;
      const size_t count = basis.size();
      for (size_t bi = 0; bi < count && static_cast<int>(basis.size()) < k; ++bi)
        for (const auto& p : fam.pairs) {
          CVector y = mat_vec(p.op, basis[bi]);
          const double res = detail::orthogonal_residual(basis, y);
          if (res > cut) {
            vscale(y, Complex(1.0 / res, 0.0));
            basis.push_back(std::move(y));
            grew = true;
            if (static_cast<int>(basis.size()) >= k) break;
          }
        }
    }
    if (static_cast<int>(basis.size()) >= k) continue;  // closed to the whole space
    ComplexMatrix bm = detail::basis_to_matrix(basis, k);
    bool duplicate = false;
    for (const auto& c : candidates)
      if (c.cols() == bm.cols() && subspace_covers(c, bm, 1e-8)) {
        duplicate = true;
        break;
      }
    if (!duplicate) candidates.push_back(std::move(bm));
  }

  std::vector<SubspaceBasis> found;
  for (auto& bm : candidates) {
    const double res = invariance_residual(fam, bm);
    if (res <= tol * scale) found.push_back({std::move(bm), res});
  }

  // Keep minimal subspaces under inclusion, dimension-ordered.
  std::sort(found.begin(), found.end(), [](const SubspaceBasis& a, const SubspaceBasis& b) {
    return a.subspace_dim() < b.subspace_dim();
  });
  std::vector<SubspaceBasis> minimal;
  for (auto& cand : found) {
    bool contains_kept = false;
    for (const auto& kept : minimal)
      if (subspace_covers(cand.basis, kept.basis, 1e-9)) {
        contains_kept = true;
        break;
      }
    if (!contains_kept) minimal.push_back(std::move(cand));
  }
  return minimal;
}

}  // namespace qchan
