#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qchan/complex_matrix.hpp"
#include "qchan/hermitian_eigen.hpp"

namespace qchan {

/// Library-wide warning sink (pruning notices and similar). Defaults to
/// stderr; tests may swap it out.
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> handler = [](const std::string& msg) {
    std::cerr << "[qchan] warning: " << msg << "\n";
  };
  return handler;
}

inline void warn(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

/// One weighted atom of the a-priori measure mu = sum_i w_i delta_{v_i}.
struct MatrixAtom {
  double weight = 0.0;
  ComplexMatrix point;
};

struct PriorMeasure {
  int dim = 0;
  std::vector<MatrixAtom> atoms;

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.weight;
    return m;
  }
};

// --- L-map variants ---------------------------------------------------------

struct IdentityMap {};

struct ConjugationByUnitary {
  ComplexMatrix u;
};

/// Explicit K_i per atom, ignoring the atom matrices.
struct TableMap {
  std::vector<ComplexMatrix> ops;
};

/// The Gibbs-maximizer form: K_i = phi_i * P for all atoms except the special
/// one, which gets phi_i * Q. P is the cyclic shift P|i+1> = |i>, Q is the
/// identity with the last diagonal entry flipped to -1.
struct ScaledShiftMap {
  std::vector<double> phi;
  int special_atom = 0;
};

using LMapSpec = std::variant<IdentityMap, ConjugationByUnitary, TableMap, ScaledShiftMap>;

inline ComplexMatrix cyclic_shift_matrix(int k) {
  // P = sum_i |i><i+1| with |k+1> = |1>.
  ComplexMatrix p(k, k);
  for (int i = 0; i < k; ++i) p(i, (i + 1) % k) = 1.0;
  return p;
}

inline ComplexMatrix last_sign_flip_matrix(int k) {
  ComplexMatrix q = ComplexMatrix::identity(k);
  q(k - 1, k - 1) = -1.0;
  return q;
}

// --- Kraus family -----------------------------------------------------------

/// Weighted Kraus pairs (w_i, K_i = L(v_i)) together with the measure atoms
/// that produced them. Zero operators are pruned at construction; the
/// measure's total mass is carried verbatim and never renormalized to 1 --
/// entropy signs depend on it.
struct KrausFamily {
  struct Pair {
    double weight = 0.0;
    ComplexMatrix point;  // v_i in supp(mu)
    ComplexMatrix op;     // K_i = L(v_i)
  };

  int dim = 0;
  std::vector<Pair> pairs;
  double measure_mass = 0.0;  // sum of all input atom weights, pre-pruning
  LMapSpec lmap = IdentityMap{};

  size_t size() const { return pairs.size(); }

  /// The L-square-integrability value sum_i w_i |K_i|^2.
  double square_integrability() const {
    double s = 0.0;
    for (const auto& p : pairs) {
      const double n = hs_norm(p.op);
      s += p.weight * n * n;
    }
    return s;
  }
};

inline ComplexMatrix apply_lmap(const LMapSpec& l, const ComplexMatrix& v, size_t atom_index,
                                int dim) {
  if (std::holds_alternative<IdentityMap>(l)) return v;
  if (const auto* c = std::get_if<ConjugationByUnitary>(&l)) return c->u * v * adjoint(c->u);
  if (const auto* t = std::get_if<TableMap>(&l)) {
    if (atom_index >= t->ops.size()) throw std::invalid_argument("TableMap: missing operator");
    return t->ops[atom_index];
  }
  const auto& ss = std::get<ScaledShiftMap>(l);
  if (atom_index >= ss.phi.size()) throw std::invalid_argument("ScaledShiftMap: missing phi");
  const ComplexMatrix base = (static_cast<int>(atom_index) == ss.special_atom)
                                 ? last_sign_flip_matrix(dim)
                                 : cyclic_shift_matrix(dim);
  return base * ss.phi[atom_index];
}

constexpr double kZeroAtomThreshold = 1e-15;  // prune when w * |K|^2 falls below

inline KrausFamily build_family(const PriorMeasure& mu, const LMapSpec& l) {
  if (mu.atoms.empty()) throw std::invalid_argument("build_family: measure has no atoms");
  const int k = mu.dim;
  if (const auto* c = std::get_if<ConjugationByUnitary>(&l)) {
    if (c->u.dim() != k) throw std::invalid_argument("build_family: unitary dim mismatch");
    const double dev = hs_norm(c->u * adjoint(c->u) - ComplexMatrix::identity(k));
    if (dev > 1e-10)
      throw std::invalid_argument("build_family: conjugation matrix not unitary (|UU^dagger - I| = " +
                                  std::to_string(dev) + ")");
  }

  KrausFamily fam;
  fam.dim = k;
  fam.lmap = l;
  size_t pruned = 0;
  double pruned_mass = 0.0;
  for (size_t i = 0; i < mu.atoms.size(); ++i) {
    const auto& atom = mu.atoms[i];
    if (atom.weight <= 0.0) throw std::invalid_argument("build_family: nonpositive atom weight");
    if (atom.point.dim() != k) throw std::invalid_argument("build_family: atom dim mismatch");
    ComplexMatrix op = apply_lmap(l, atom.point, i, k);
    if (op.dim() != k) throw std::invalid_argument("build_family: operator dim mismatch");
    const double n = hs_norm(op);
    fam.measure_mass += atom.weight;
    if (atom.weight * n * n < kZeroAtomThreshold) {
      ++pruned;
      pruned_mass += atom.weight;
      continue;
    }
    fam.pairs.push_back({atom.weight, atom.point, std::move(op)});
  }
  if (pruned > 0)
    warn("build_family: pruned " + std::to_string(pruned) + " zero Kraus atoms (mass " +
         std::to_string(pruned_mass) + ")");
  if (fam.pairs.empty()) throw std::invalid_argument("build_family: all atoms pruned");
  return fam;
}

inline PriorMeasure measure_of(const KrausFamily& fam) {
  PriorMeasure mu;
  mu.dim = fam.dim;
  for (const auto& p : fam.pairs) mu.atoms.push_back({p.weight, p.point});
  return mu;
}

/// Wraps explicit operators as a family over their own graph (v_i = K_i).
inline KrausFamily family_from_ops(const std::vector<ComplexMatrix>& ops,
                                   const std::vector<double>& weights = {}) {
  if (ops.empty()) throw std::invalid_argument("family_from_ops: empty");
  PriorMeasure mu;
  mu.dim = ops.front().dim();
  for (size_t i = 0; i < ops.size(); ++i)
    mu.atoms.push_back({weights.empty() ? 1.0 : weights[i], ops[i]});
  return build_family(mu, IdentityMap{});
}

// --- Markov-chain construction ---------------------------------------------

/// Atoms K_(i,j) = sqrt(p_ij) |i><j| for a column-stochastic P, enumerated
/// row-major; at d = 2 this is the V_1..V_4 layout of the Markov example.
inline std::pair<PriorMeasure, KrausFamily> from_markov_chain(
    const std::vector<std::vector<double>>& p) {
  const int d = static_cast<int>(p.size());
  if (d < 1) throw std::invalid_argument("from_markov_chain: empty matrix");
  for (const auto& row : p)
    if (static_cast<int>(row.size()) != d)
      throw std::invalid_argument("from_markov_chain: non-square matrix");
  for (int j = 0; j < d; ++j) {
    double col = 0.0;
    for (int i = 0; i < d; ++i) {
      if (p[i][j] < 0.0) throw std::invalid_argument("from_markov_chain: negative entry");
      col += p[i][j];
    }
    if (std::abs(col - 1.0) > 1e-12)
      throw std::invalid_argument("from_markov_chain: column " + std::to_string(j) +
                                  " sums to " + std::to_string(col));
  }

  PriorMeasure mu;
  mu.dim = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      ComplexMatrix v(d, d);
      v(i, j) = std::sqrt(p[i][j]);
      mu.atoms.push_back({1.0, std::move(v)});
    }
  KrausFamily fam = build_family(mu, IdentityMap{});
  return {std::move(mu), std::move(fam)};
}

// --- Gaussian rotation construction -----------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
}

/// Quadrature discretization of the rotation-matrix measure with density
/// (1/4 pi) exp(-(x^2+y^2)/2) on {[[x,-y],[y,x]]}. Radial Gauss-Legendre on
/// (0, R], R = 12 (density below 1e-31 beyond), uniform trapezoid in angle
/// (periodic, spectrally accurate). Total mass is 1/2, carried verbatim.
inline std::pair<PriorMeasure, KrausFamily> from_gaussian_rotation(int n_r, int n_theta) {
  if (n_r < 8 || n_theta < 8)
    throw std::invalid_argument("from_gaussian_rotation: need n_r >= 8 and n_theta >= 8");
  constexpr double kRadius = 12.0;
  std::vector<double> gl_nodes, gl_weights;
  gauss_legendre(n_r, gl_nodes, gl_weights);

  PriorMeasure mu;
  mu.dim = 2;
  const double dtheta = 2.0 * M_PI / n_theta;
  for (int i = 0; i < n_r; ++i) {
    const double r = 0.5 * kRadius * (gl_nodes[i] + 1.0);
    const double wr = 0.5 * kRadius * gl_weights[i];
    const double density = std::exp(-0.5 * r * r) / (4.0 * M_PI);
    for (int j = 0; j < n_theta; ++j) {
      const double theta = dtheta * j;
      const double x = r * std::cos(theta);
      const double y = r * std::sin(theta);
      ComplexMatrix v(2, 2);
      v(0, 0) = x;
      v(0, 1) = -y;
      v(1, 0) = y;
      v(1, 1) = x;
      mu.atoms.push_back({density * r * wr * dtheta, std::move(v)});
    }
  }
  KrausFamily fam = build_family(mu, IdentityMap{});
  return {std::move(mu), std::move(fam)};
}

// --- Truncation of infinite atom families -----------------------------------

/// Indexed atom rule for an infinite measure: atom(n) for n = 1, 2, ... and
/// an analytic upper bound on the discarded tail sum_{m > n} w_m |V_m|^2.
struct AtomGenerator {
  std::function<MatrixAtom(size_t)> atom;
  std::function<double(size_t)> tail_bound;
};

struct TruncationReport {
  size_t kept = 0;
  double tail_bound = 0.0;
  bool tolerance_met = false;
};

struct TruncationOptions {
  size_t max_atoms = 100000;
  /// Throw when the cap is reached with the tail above mass_tol; when false
  /// the capped family is returned (exactly renormalized) and the shortfall
  /// is reported.
  bool throw_on_cap = true;
};

/// Keeps atoms until the tail bound drops below mass_tol, then renormalizes
/// the kept family on the right by S^{-1/2}, S = sum w V^dagger V, so that
/// the truncated family is exactly stochastic. For the shift-to-e1 family
/// this reproduces "recompute the c, d constants over the kept indices".
inline PriorMeasure truncate_infinite_family(const AtomGenerator& gen, double mass_tol,
                                             const TruncationOptions& opts = {},
                                             TruncationReport* report = nullptr) {
  if (mass_tol <= 0.0) throw std::invalid_argument("truncate_infinite_family: mass_tol <= 0");
  PriorMeasure mu;
  double tail = std::numeric_limits<double>::infinity();
  size_t n = 0;
  while (n < opts.max_atoms) {
    ++n;
    MatrixAtom a = gen.atom(n);
    if (mu.atoms.empty()) mu.dim = a.point.dim();
    mu.atoms.push_back(std::move(a));
    tail = gen.tail_bound(n);
    if (tail <= mass_tol) break;
  }
  const bool met = tail <= mass_tol;
  if (!met) {
    if (opts.throw_on_cap)
      throw std::runtime_error("truncate_infinite_family: tail bound " + std::to_string(tail) +
                               " above mass_tol at hard cap " + std::to_string(opts.max_atoms));
    warn("truncate_infinite_family: capped at " + std::to_string(opts.max_atoms) +
         " atoms with tail bound " + std::to_string(tail) +
         " above mass_tol; kept family renormalized exactly");
  }

  ComplexMatrix s(mu.dim, mu.dim);
  for (const auto& a : mu.atoms) s += (adjoint(a.point) * a.point) * a.weight;
  s = hermitize(s);
  const ComplexMatrix si = hermitian_inv_sqrt(s);  // throws if the kept family is singular
  for (auto& a : mu.atoms) a.point = a.point * si;

  if (report) *report = {mu.atoms.size(), tail, met};
  return mu;
}

/// Shift-to-e1 family: V_{2n} = c E_11 / (2n), V_{2n-1} = d E_12 / (2n-1),
/// unit weights, with c, d normalizing the full series.
inline AtomGenerator example1_generator() {
  const double c = std::sqrt(24.0) / M_PI;  // (sum 1/(2n)^2)^(-1/2)
  const double d = std::sqrt(8.0) / M_PI;   // (sum 1/(2n-1)^2)^(-1/2)
  AtomGenerator gen;
  gen.atom = [c, d](size_t n) {
    ComplexMatrix v(2, 2);
    if (n % 2 == 0)
      v(0, 0) = c / static_cast<double>(n);
    else
      v(0, 1) = d / static_cast<double>(n);
    return MatrixAtom{1.0, std::move(v)};
  };
  const double cmax = std::max(24.0, 8.0) / (M_PI * M_PI);
  gen.tail_bound = [cmax](size_t n) { return cmax / static_cast<double>(n); };
  return gen;
}

}  // namespace qchan
