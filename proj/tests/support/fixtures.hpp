#pragma once

#include <vector>

#include "qchan/channel.hpp"
#include "qchan/measure.hpp"
#include "support/test_util.hpp"

namespace qtest {

using Matrix2 = std::vector<std::vector<double>>;

inline Matrix2 mc_default_p() { return {{0.5, 0.3}, {0.5, 0.7}}; }

/// Markov-chain channel fixture (four sqrt(p_ij) |i><j| atoms, unit weights).
inline qchan::Channel fix_mc(const Matrix2& p = mc_default_p()) {
  auto [mu, fam] = qchan::from_markov_chain(p);
  return qchan::Channel(std::move(fam));
}

/// Closed form of the invariant density for the 2x2 Markov fixture.
inline qchan::ComplexMatrix mc_rho_closed_form(const Matrix2& p = mc_default_p()) {
  qchan::ComplexMatrix rho(2, 2);
  const double denom = 1.0 - p[0][0] + p[0][1];
  rho(0, 0) = p[0][1] / denom;
  rho(1, 1) = (1.0 - p[0][0]) / denom;
  return rho;
}

/// Stationary vector of a column-stochastic P by dense Gaussian elimination
/// on (P - I), independent of the library's spectral machinery.
inline std::vector<double> stationary_vector(const Matrix2& p) {
  const int d = static_cast<int>(p.size());
  // Rows: (P - I) pi = 0 for d-1 rows, plus sum pi = 1.
  std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
  for (int i = 0; i < d - 1; ++i) {
    for (int j = 0; j < d; ++j) a[i][j] = p[i][j] - (i == j ? 1.0 : 0.0);
    a[i][d] = 0.0;
  }
  for (int j = 0; j < d; ++j) a[d - 1][j] = 1.0;
  a[d - 1][d] = 1.0;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    for (int r = 0; r < d; ++r) {
      if (r == col || a[col][col] == 0.0) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= d; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> pi(d);
  for (int i = 0; i < d; ++i) pi[i] = a[i][d] / a[i][i];
  return pi;
}

/// Classical entropy rate -sum_j pi_j sum_i p_ij log p_ij.
inline double classical_entropy_rate(const Matrix2& p) {
  const auto pi = stationary_vector(p);
  double h = 0.0;
  for (size_t j = 0; j < p.size(); ++j)
    for (size_t i = 0; i < p.size(); ++i)
      if (p[i][j] > 0.0) h -= pi[j] * p[i][j] * std::log(p[i][j]);
  return h;
}

/// The four-projector example: mu = (1/2) sum of deltas at the matrix units.
inline qchan::KrausFamily fix_4proj_family() {
  qchan::PriorMeasure mu;
  mu.dim = 2;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      qchan::ComplexMatrix v(2, 2);
      v(i, j) = 1.0;
      mu.atoms.push_back({0.5, std::move(v)});
    }
  return qchan::build_family(mu, qchan::IdentityMap{});
}

inline qchan::Channel fix_4proj() { return qchan::Channel(fix_4proj_family()); }

/// Shift-to-e1 channel, truncated and exactly renormalized. The 1/n^2 tail
/// cannot reach tight mass tolerances inside the atom cap, so the capped
/// (still exactly stochastic) family is used in that regime.
inline qchan::Channel fix_shift(double mass_tol = 1e-8, size_t cap = 4000) {
  qchan::TruncationOptions opts;
  opts.max_atoms = cap;
  opts.throw_on_cap = false;
  const auto mu = qchan::truncate_infinite_family(qchan::example1_generator(), mass_tol, opts);
  return qchan::Channel(qchan::build_family(mu, qchan::IdentityMap{}));
}

inline qchan::Channel fix_gauss(int n_r = 40, int n_theta = 32) {
  auto [mu, fam] = qchan::from_gaussian_rotation(n_r, n_theta);
  return qchan::Channel(std::move(fam));
}

/// Random Kraus family made exactly stochastic by K_i <- K_i S^{-1/2}.
inline qchan::KrausFamily random_stochastic_family(int k, int m, qchan::RngStream& rng,
                                                   bool unit_weights = true) {
  std::vector<qchan::ComplexMatrix> ops;
  std::vector<double> weights;
  qchan::ComplexMatrix s(k, k);
  for (int i = 0; i < m; ++i) {
    ops.push_back(random_matrix(k, rng));
    weights.push_back(unit_weights ? 1.0 : 0.25 + rng.uniform());
    s += (qchan::adjoint(ops.back()) * ops.back()) * weights.back();
  }
  const auto si = qchan::hermitian_inv_sqrt(qchan::hermitize(s));
  for (auto& op : ops) op = op * si;
  return qchan::family_from_ops(ops, weights);
}

inline qchan::KrausFamily random_raw_family(int k, int m, qchan::RngStream& rng) {
  std::vector<qchan::ComplexMatrix> ops;
  std::vector<double> weights;
  for (int i = 0; i < m; ++i) {
    ops.push_back(random_matrix(k, rng) * 0.6);
    weights.push_back(0.25 + rng.uniform());
  }
  return qchan::family_from_ops(ops, weights);
}

/// Random atom set to share between potentials and channels.
inline qchan::PriorMeasure random_prior_measure(int k, int m, qchan::RngStream& rng) {
  qchan::PriorMeasure mu;
  mu.dim = k;
  for (int i = 0; i < m; ++i) mu.atoms.push_back({0.25 + rng.uniform(), random_matrix(k, rng)});
  return mu;
}

/// Table family over a fixed measure; optionally right-normalized so that
/// sum w K^dagger K = Id.
inline qchan::KrausFamily random_table_family(const qchan::PriorMeasure& mu,
                                              qchan::RngStream& rng, bool stochastic) {
  const int k = mu.dim;
  std::vector<qchan::ComplexMatrix> ops;
  for (size_t i = 0; i < mu.atoms.size(); ++i) ops.push_back(random_matrix(k, rng) * 0.7);
  if (stochastic) {
    qchan::ComplexMatrix s(k, k);
    for (size_t i = 0; i < mu.atoms.size(); ++i)
      s += (qchan::adjoint(ops[i]) * ops[i]) * mu.atoms[i].weight;
    const auto si = qchan::hermitian_inv_sqrt(qchan::hermitize(s));
    for (auto& op : ops) op = op * si;
  }
  return qchan::build_family(mu, qchan::TableMap{std::move(ops)});
}

inline qchan::Channel random_irreducible_stochastic(int k, int m, qchan::RngStream& rng,
                                                    bool unit_weights = true) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    qchan::Channel ch(random_stochastic_family(k, m, rng, unit_weights));
    const auto rep = qchan::irreducibility_report(ch);
    if (rep.verdict == qchan::Verdict::Irreducible) return ch;
  }
  throw std::runtime_error("random_irreducible_stochastic: no irreducible draw in 50 tries");
}

inline qchan::Channel random_irreducible_raw(int k, int m, qchan::RngStream& rng) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    qchan::Channel ch(random_raw_family(k, m, rng));
    const auto rep = qchan::irreducibility_report(ch);
    if (rep.verdict == qchan::Verdict::Irreducible) return ch;
  }
  throw std::runtime_error("random_irreducible_raw: no irreducible draw in 50 tries");
}

}  // namespace qtest
