#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qchan/channel.hpp"

namespace qchan {

/// Transition kernel over the measure atoms:
///   P(i,j) = tr(K_j K_i rho_L K_i^dagger K_j^dagger) / tr(K_i rho_L K_i^dagger),
/// with rows whose stationary mass vanishes marked dead (0 log 0 convention).
struct TransitionKernel {
  std::vector<double> qtilde;           // tr(K_i rho_L K_i^dagger)
  std::vector<double> q;                // w_i * qtilde_i, the stationary atom masses
  std::vector<std::vector<double>> p;   // P(i,j); dead rows left zero
  std::vector<bool> live;

  double stationary_mass() const {
    double s = 0.0;
    for (double qi : q) s += qi;
    return s;
  }
};

constexpr double kDeadRowThreshold = 1e-14;

namespace detail {

inline void require_stochastic_unit_radius(const Channel& ch, const SpectralData& sd,
                                           double tol, const char* what) {
  const auto st = is_stochastic(ch, tol);
  if (!st.stochastic)
    throw std::invalid_argument(std::string(what) + ": channel not stochastic (residual " +
                                std::to_string(st.residual) + ")");
  if (std::abs(sd.lambda - 1.0) > std::max(tol, 1e-8))
    throw std::invalid_argument(std::string(what) + ": spectral radius " +
                                std::to_string(sd.lambda) + " != 1");
}

}  // namespace detail

inline TransitionKernel transition_kernel(const Channel& ch, const SpectralData& sd,
                                          double stochastic_tol = 1e-6) {
  detail::require_stochastic_unit_radius(ch, sd, stochastic_tol, "transition_kernel");
  const auto& pairs = ch.family().pairs;
  const size_t m = pairs.size();

  TransitionKernel tk;
  tk.qtilde.resize(m);
  tk.q.resize(m);
  tk.live.resize(m);
  tk.p.assign(m, std::vector<double>(m, 0.0));

  std::vector<ComplexMatrix> a(m);   // K_i rho K_i^dagger
  std::vector<ComplexMatrix> g(m);   // K_j^dagger K_j
  for (size_t i = 0; i < m; ++i) {
    a[i] = pairs[i].op * sd.rho * adjoint(pairs[i].op);
    g[i] = adjoint(pairs[i].op) * pairs[i].op;
    tk.qtilde[i] = trace(a[i]).real();
    tk.q[i] = pairs[i].weight * tk.qtilde[i];
    tk.live[i] = tk.qtilde[i] > kDeadRowThreshold;
  }
  for (size_t i = 0; i < m; ++i) {
    if (!tk.live[i]) continue;
    for (size_t j = 0; j < m; ++j) {
      // tr(K_j A K_j^dagger) = tr(A K_j^dagger K_j), both factors hermitian.
      tk.p[i][j] = std::max(0.0, hs_inner(a[i], g[j]).real() / tk.qtilde[i]);
    }
  }
  return tk;
}

inline TransitionKernel transition_kernel(const Channel& ch, double stochastic_tol = 1e-6) {
  return transition_kernel(ch, spectral_data(ch), stochastic_tol);
}

/// Channel entropy
///   h = -sum_ij w_i w_j qtilde_i P(i,j) log P(i,j),
/// natural logarithm, 0 log 0 = 0. Requires a stochastic channel with unit
/// spectral radius; rho_L is the one produced by spectral_data (power
/// iteration started at Id/k), which matters only when the radius is not
/// simple.
inline double entropy(const Channel& ch, const SpectralData& sd, double stochastic_tol = 1e-6) {
  const auto tk = transition_kernel(ch, sd, stochastic_tol);
  const auto& pairs = ch.family().pairs;
  double h = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (!tk.live[i]) continue;
    double row = 0.0;
    for (size_t j = 0; j < pairs.size(); ++j) {
      const double pij = tk.p[i][j];
      if (pij > 0.0) row += pairs[j].weight * pij * std::log(pij);
    }
    h -= tk.q[i] * row;
  }
  return h;
}

inline double entropy(const Channel& ch, double stochastic_tol = 1e-6) {
  return entropy(ch, spectral_data(ch), stochastic_tol);
}

// --- Potentials and pressure ---------------------------------------------------

/// Spectral data of the potential channel phi_H together with the atomwise
/// values U_H(v_i) = log tr(sigma_H H(v_i) rho_H H(v_i)^dagger).
struct PotentialData {
  double lambda = 0.0;
  ComplexMatrix rho;
  ComplexMatrix sigma;
  bool simple = false;
  std::vector<double> u;

  /// q(v_i) = exp(U_i) / lambda, the Gibbs kernel column.
  double gibbs_q(size_t i) const { return std::exp(u[i]) / lambda; }
};

inline PotentialData potential_data(const KrausFamily& h_family) {
  const Channel hch(h_family);
  const auto sd = spectral_data(hch);
  PotentialData pd;
  pd.lambda = sd.lambda;
  pd.rho = sd.rho;
  pd.sigma = sd.sigma;
  pd.simple = sd.simple;
  pd.u.resize(h_family.size());
  for (size_t i = 0; i < h_family.size(); ++i) {
    const auto& op = h_family.pairs[i].op;
    const double val = trace(sd.sigma * op * sd.rho * adjoint(op)).real();
    if (!(val > 1e-100))
      throw std::domain_error("potential_data: atom " + std::to_string(i) +
                              " has tr(sigma H rho H^dagger) = " + std::to_string(val) +
                              "; zero atoms are rejected");
    pd.u[i] = std::log(val);
  }
  return pd;
}

/// P(H) = log lambda_H (by the variational theorem, not by search).
inline double pressure(const PotentialData& pd) { return std::log(pd.lambda); }
inline double pressure(const KrausFamily& h_family) { return pressure(potential_data(h_family)); }

namespace detail {

/// Matches each atom of `sub` to an atom of `full` by its measure point,
/// in order; throws if some atom has no match. Pruned zero atoms on the
/// `sub` side are the only tolerated difference.
inline std::vector<size_t> match_atoms(const KrausFamily& sub, const KrausFamily& full,
                                       const char* what) {
  std::vector<size_t> idx(sub.size());
  size_t j = 0;
  for (size_t i = 0; i < sub.size(); ++i) {
    while (j < full.size() &&
           (hs_norm(sub.pairs[i].point - full.pairs[j].point) > 1e-12 ||
            std::abs(sub.pairs[i].weight - full.pairs[j].weight) > 1e-12))
      ++j;
    if (j >= full.size())
      throw std::invalid_argument(std::string(what) +
                                  ": measure mismatch; the two families must share mu atoms");
    idx[i] = j++;
  }
  return idx;
}

}  // namespace detail

/// h_mu(L) + sum_i w_i U_H(v_i) tr(K^L_i rho_L K^L_i^dagger). L and H must be
/// built over the same measure atoms.
inline double pressure_functional(const Channel& l, const SpectralData& l_sd,
                                  const KrausFamily& h_family, const PotentialData& hd,
                                  double stochastic_tol = 1e-6) {
  const auto idx = detail::match_atoms(l.family(), h_family, "pressure_functional");
  const double h_entropy = entropy(l, l_sd, stochastic_tol);
  double integral = 0.0;
  for (size_t i = 0; i < l.family().size(); ++i) {
    const auto& p = l.family().pairs[i];
    const double qt = trace(p.op * l_sd.rho * adjoint(p.op)).real();
    integral += p.weight * hd.u[idx[i]] * qt;
  }
  return h_entropy + integral;
}

inline double pressure_functional(const Channel& l, const KrausFamily& h_family) {
  return pressure_functional(l, spectral_data(l), h_family, potential_data(h_family));
}

// --- Gibbs channels -------------------------------------------------------------

/// The constructive maximizer: K_i = phi(v_i) P except at one designated atom
/// where K_i = phi(v_i) Q, with phi(v) = sqrt(tr(sigma_H H(v) rho_H
/// H(v)^dagger) / lambda_H), P the cyclic shift and Q the last-entry sign
/// flip. The designated atom realizes the separating neighborhood; by default
/// it is the atom of largest phi.
inline KrausFamily gibbs_maximizer(const KrausFamily& h_family, const PotentialData& hd,
                                   int special_atom = -1) {
  const size_t m = h_family.size();
  std::vector<double> phi(m);
  size_t nonzero = 0;
  size_t argmax = 0;
  for (size_t i = 0; i < m; ++i) {
    phi[i] = std::sqrt(hd.gibbs_q(i));
    if (phi[i] > 1e-12) ++nonzero;
    if (phi[i] > phi[argmax]) argmax = i;
  }
  if (nonzero < 2)
    throw std::invalid_argument(
        "gibbs_maximizer: need at least two atoms with nonzero phi (a single-point measure "
        "cannot carry an irreducible potential)");
  const int special = special_atom >= 0 ? special_atom : static_cast<int>(argmax);
  if (special >= static_cast<int>(m))
    throw std::invalid_argument("gibbs_maximizer: special atom index out of range");

  PriorMeasure mu = measure_of(h_family);
  return build_family(mu, ScaledShiftMap{std::move(phi), special});
}

inline KrausFamily gibbs_maximizer(const KrausFamily& h_family, int special_atom = -1) {
  return gibbs_maximizer(h_family, potential_data(h_family), special_atom);
}

struct GibbsConditionResult {
  bool holds = false;
  double max_deviation = 0.0;
};

/// Checks P_L(i,j) = (1/lambda_H) tr(sigma_H H(v_j) rho_H H(v_j)^dagger) over
/// live rows, the equality characterizing Gibbs channels.
inline GibbsConditionResult gibbs_condition_check(const Channel& l, const KrausFamily& h_family,
                                                  double tol = 1e-8,
                                                  double stochastic_tol = 1e-6) {
  const auto idx = detail::match_atoms(l.family(), h_family, "gibbs_condition_check");
  const auto hd = potential_data(h_family);
  const auto tk = transition_kernel(l, spectral_data(l), stochastic_tol);
  double dev = 0.0;
  for (size_t i = 0; i < l.family().size(); ++i) {
    if (!tk.live[i]) continue;
    for (size_t j = 0; j < l.family().size(); ++j)
      dev = std::max(dev, std::abs(tk.p[i][j] - hd.gibbs_q(idx[j])));
  }
  return {dev <= tol, dev};
}

/// -int p log p + int p log q <= 0, with equality iff p = q mu-a.e.
inline double gibbs_inequality_check(const std::vector<double>& p, const std::vector<double>& q,
                                     const std::vector<double>& w) {
  if (p.size() != q.size() || p.size() != w.size())
    throw std::invalid_argument("gibbs_inequality_check: length mismatch");
  double sp = 0.0, sq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (w[i] > 0.0 && (p[i] <= 0.0 || q[i] <= 0.0))
      throw std::invalid_argument("gibbs_inequality_check: nonpositive density at weighted atom");
    sp += w[i] * p[i];
    sq += w[i] * q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("gibbs_inequality_check: densities must integrate to 1 (got " +
                                std::to_string(sp) + ", " + std::to_string(sq) + ")");
  double val = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    if (w[i] > 0.0) val += w[i] * p[i] * (std::log(q[i]) - std::log(p[i]));
  return val;
}

}  // namespace qchan
