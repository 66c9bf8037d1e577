#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "qchan/channel.hpp"
#include "qchan/schur.hpp"
#include "qchan/subspace.hpp"

namespace qchan {

// --- Phi-Erg classification ------------------------------------------------------

enum class PhiErgClass { Irreducible, PhiErg, NotPhiErg, Undetermined };

inline const char* to_string(PhiErgClass c) {
  switch (c) {
    case PhiErgClass::Irreducible: return "irreducible";
    case PhiErgClass::PhiErg: return "phi_erg";
    case PhiErgClass::NotPhiErg: return "not_phi_erg";
    default: return "undetermined";
  }
}

struct PhiErgReport {
  PhiErgClass classification = PhiErgClass::Undetermined;
  std::vector<SubspaceBasis> minimal_subspaces;
  std::string detail;
};

/// Existence and uniqueness of the minimal nontrivial invariant subspace:
/// none found (with spectral concurrence) means irreducible, exactly one
/// means Phi-Erg with that witness, two or more disjoint ones deny Phi-Erg.
inline PhiErgReport phi_erg_classify(const KrausFamily& fam, double tol = 1e-9) {
  PhiErgReport rep;
  rep.minimal_subspaces = invariant_subspace_search(fam, tol);

  if (rep.minimal_subspaces.empty()) {
    try {
      const Channel ch(fam);
      const auto sd = spectral_data(ch);
      // Strict positivity at the eigensolver's resolution: simplicity plus
      // two positive definite eigenmatrices characterizes irreducibility, and
      // weakly coupled channels sit legitimately below the report's 1e-9
      // safety margin.
      const bool primary = sd.simple && min_eigenvalue(sd.rho) > 1e-12 &&
                           min_eigenvalue(sd.sigma) > 1e-12;
      if (primary) {
        rep.classification = PhiErgClass::Irreducible;
      } else {
        rep.classification = PhiErgClass::Undetermined;
        rep.detail = "no invariant subspace found but the spectral test does not concur";
      }
    } catch (const std::exception& e) {
      rep.classification = PhiErgClass::Undetermined;
      rep.detail = std::string("spectral test unavailable: ") + e.what();
    }
    return rep;
  }

  if (rep.minimal_subspaces.size() == 1) {
    rep.classification = PhiErgClass::PhiErg;
    return rep;
  }

  // Two or more minimal subspaces: confirm pairwise disjointness through the
  // principal angle (minimal distinct invariant subspaces intersect trivially
  // in exact arithmetic; near-unit overlap signals a tolerance conflict).
  for (size_t a = 0; a < rep.minimal_subspaces.size(); ++a)
    for (size_t b = a + 1; b < rep.minimal_subspaces.size(); ++b) {
      const double overlap = op_norm(adjoint(rep.minimal_subspaces[a].basis) *
                                     rep.minimal_subspaces[b].basis);
      if (overlap > 1.0 - 1e-6) {
        rep.classification = PhiErgClass::Undetermined;
        rep.detail = "minimal subspace candidates overlap (cos angle " +
                     std::to_string(overlap) + ")";
        return rep;
      }
    }
  rep.classification = PhiErgClass::NotPhiErg;
  return rep;
}

// --- Distinct-spectrum perturbation -----------------------------------------------

/// Replaces atom `atom_index`'s operator K by K' with k pairwise distinct
/// nonzero eigenvalues and |K' - K| < eps/2. The perturbation is diagonal in
/// a Schur basis of K (numerically stable stand-in for a Jordan basis),
/// with greedy shifts delta/2^i on offending diagonal entries.
inline KrausFamily distinct_spectrum_perturbation(const KrausFamily& fam, size_t atom_index,
                                                  double eps) {
  if (eps <= 0.0) throw std::invalid_argument("distinct_spectrum_perturbation: eps <= 0");
  if (atom_index >= fam.size())
    throw std::invalid_argument("distinct_spectrum_perturbation: atom index out of range");
  const int k = fam.dim;
  const ComplexMatrix& kop = fam.pairs[atom_index].op;
  const auto sd = schur_decompose(kop);

  const double delta = 0.5 * eps;
  const double margin = std::max(1e-11, 1e-13 * (max_abs(sd.t) + delta));
  std::vector<Complex> accepted;
  std::vector<Complex> shifts(k, Complex(0.0));
  std::set<int> used_powers;
  auto conflicts = [&](Complex c) {
    if (std::abs(c) <= margin) return true;
    for (const auto& a : accepted)
      if (std::abs(c - a) <= margin) return true;
    return false;
  };
  for (int j = 0; j < k; ++j) {
    Complex cand = sd.t(j, j);
    if (conflicts(cand)) {
      bool placed = false;
      for (int p = 2; p <= 200 && !placed; ++p) {
        if (used_powers.count(p)) continue;
        cand = sd.t(j, j) + delta * std::pow(0.5, p);
        if (!conflicts(cand)) {
          shifts[j] = cand - sd.t(j, j);
          used_powers.insert(p);
          placed = true;
        }
      }
      if (!placed)
        throw std::runtime_error("distinct_spectrum_perturbation: no admissible shift found");
    }
    accepted.push_back(cand);
  }

  ComplexMatrix t2 = sd.t;
  for (int j = 0; j < k; ++j) t2(j, j) += shifts[j];
  KrausFamily out = fam;
  out.pairs[atom_index].op = sd.q * t2 * adjoint(sd.q);
  out.lmap = TableMap{[&] {
    std::vector<ComplexMatrix> ops;
    for (const auto& p : out.pairs) ops.push_back(p.op);
    return ops;
  }()};
  return out;
}

// --- Irreducibility-restoring perturbation ----------------------------------------

struct PerturbationResult {
  KrausFamily family;
  bool certified = false;      // phi_erg_classify returned irreducible
  int halvings = 0;
  double distance = 0.0;       // max over atoms of the operator-norm change
  PhiErgClass classification = PhiErgClass::Undetermined;
};

/// M_delta(v) = L_eps(v) + (delta phi(v) / (2 |A|)) A, phi(v) = |v - v_1| /
/// (|v| + |v_1|), with A the cyclic shift on the distinguished atom's
/// eigenbasis. delta halves from eps/2 until the classification comes back
/// irreducible (the exceptional set is finite, so this terminates for
/// generic input); gives up after max_halvings.
inline PerturbationResult irreducible_perturbation(const KrausFamily& fam, double eps,
                                                   int max_halvings = 40) {
  if (fam.size() < 2)
    throw std::invalid_argument(
        "irreducible_perturbation: need at least two atoms (single-point measures stay "
        "reducible)");
  if (eps <= 0.0) throw std::invalid_argument("irreducible_perturbation: eps <= 0");
  const int k = fam.dim;

  // Already irreducible input is returned untouched.
  {
    const auto cls = phi_erg_classify(fam);
    if (cls.classification == PhiErgClass::Irreducible)
      return {fam, true, 0, 0.0, cls.classification};
  }

  const KrausFamily leps = distinct_spectrum_perturbation(fam, 0, eps);

  // Eigenbasis of the distinguished atom (k distinct eigenvalues, so the
  // eigenvector matrix is invertible) and the cyclic shift on it.
  const auto sd = schur_decompose(leps.pairs[0].op);
  ComplexMatrix x(k, k);
  for (int j = 0; j < k; ++j) {
    const CVector v = eigenvector_from_schur(sd, j);
    for (int i = 0; i < k; ++i) x(i, j) = v[i];
  }
  ComplexMatrix x_rot(k, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) x_rot(i, j) = x(i, (j + 1) % k);
  const ComplexMatrix a = x_rot * inverse(x);
  const double a_norm = op_norm(a);

  const ComplexMatrix& v1 = leps.pairs[0].point;
  std::vector<double> phi(leps.size());
  for (size_t i = 0; i < leps.size(); ++i) {
    const ComplexMatrix& v = leps.pairs[i].point;
    phi[i] = hs_norm(v - v1) / (hs_norm(v) + hs_norm(v1));
  }

  PerturbationResult res;
  double delta = 0.5 * eps;
  for (int h = 0; h <= max_halvings; ++h, delta *= 0.5) {
    KrausFamily cand = leps;
    std::vector<ComplexMatrix> ops;
    for (size_t i = 0; i < cand.size(); ++i) {
      cand.pairs[i].op += a * (delta * phi[i] / (2.0 * a_norm));
      ops.push_back(cand.pairs[i].op);
    }
    cand.lmap = TableMap{std::move(ops)};

    double dist = 0.0;
    for (size_t i = 0; i < cand.size(); ++i)
      dist = std::max(dist, op_norm(cand.pairs[i].op - fam.pairs[i].op));
    const auto cls = phi_erg_classify(cand);
    res = {std::move(cand), cls.classification == PhiErgClass::Irreducible, h, dist,
           cls.classification};
    if (res.certified) {
      if (res.distance >= eps)
        throw std::logic_error("irreducible_perturbation: distance bound violated");
      return res;
    }
  }
  warn("irreducible_perturbation: classification still " +
       std::string(to_string(res.classification)) + " after " + std::to_string(max_halvings) +
       " halvings; result undetermined");
  return res;
}

}  // namespace qchan
