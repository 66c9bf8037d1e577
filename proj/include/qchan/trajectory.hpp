#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "qchan/channel.hpp"
#include "qchan/rng.hpp"

namespace qchan {

/// Point of P(C^k): unit representative with canonical phase (first component
/// of modulus above 1e-12 made real positive).
struct ProjectivePoint {
  CVector x;

  static ProjectivePoint from(CVector v) {
    const double n = vnorm(v);
    if (n < 1e-300) throw std::invalid_argument("ProjectivePoint: zero vector");
    vscale(v, Complex(1.0 / n, 0.0));
    for (const auto& c : v) {
      if (std::abs(c) > 1e-12) {
        vscale(v, std::conj(c) / std::abs(c));
        break;
      }
    }
    return {std::move(v)};
  }

  static ProjectivePoint basis(int k, int i) {
    CVector v(k, Complex(0.0));
    v[i] = 1.0;
    return {std::move(v)};
  }

  int dim() const { return static_cast<int>(x.size()); }
};

/// d(x, y) = sqrt(1 - |<x, y>|^2), evaluated as |pi_x - pi_y|_HS / sqrt(2).
/// The projector form is free of the cancellation that floors the inner
/// product form near coincident points, so merges at 1e-10 resolve.
inline double proj_distance(const ProjectivePoint& a, const ProjectivePoint& b) {
  const size_t k = a.x.size();
  if (b.x.size() != k) throw std::invalid_argument("proj_distance: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j)
      s += std::norm(a.x[i] * std::conj(a.x[j]) - b.x[i] * std::conj(b.x[j]));
  return std::min(1.0, std::sqrt(0.5 * s));
}

/// Finitely supported probability on P(C^k).
struct EmpiricalMeasure {
  std::vector<ProjectivePoint> points;
  std::vector<double> weights;

  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

constexpr double kPointMergeTolerance = 1e-10;
constexpr double kKernelMassFloor = 1e-14;

/// Barycenter sum_j w_j |x_j><x_j|, a density matrix.
inline ComplexMatrix barycenter(const EmpiricalMeasure& nu) {
  if (nu.points.empty()) throw std::invalid_argument("barycenter: empty measure");
  const int k = nu.points.front().dim();
  ComplexMatrix rho(k, k);
  for (size_t j = 0; j < nu.points.size(); ++j) rho += outer(nu.points[j].x, nu.points[j].x) * nu.weights[j];
  return rho;
}

// --- Kernel sampling -----------------------------------------------------------

struct KernelStep {
  ProjectivePoint point;
  int atom_index = -1;
};

namespace detail {

/// Draws an atom index with probability proportional to the given masses by
/// inverse CDF; entries below the mass floor are never drawn. Exactly one
/// uniform variate is consumed.
inline int draw_atom(const std::vector<double>& masses, double total, RngStream& rng) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  int last = -1;
  for (size_t i = 0; i < masses.size(); ++i) {
    if (masses[i] < kKernelMassFloor) continue;
    acc += masses[i];
    last = static_cast<int>(i);
    if (target < acc) return last;
  }
  return last;  // roundoff spill lands on the last admissible atom
}

}  // namespace detail

/// One step of the projective kernel: atom i with probability w_i |K_i x|^2,
/// then x -> K_i x / |K_i x|.
inline KernelStep kernel_step(const Channel& ch, const ProjectivePoint& xhat, RngStream& rng) {
  const auto& pairs = ch.family().pairs;
  std::vector<double> masses(pairs.size());
  double total = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const CVector kx = mat_vec(pairs[i].op, xhat.x);
    const double n2 = vnorm(kx);
    masses[i] = pairs[i].weight * n2 * n2;
    total += masses[i];
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::runtime_error("kernel_step: step mass " + std::to_string(total) +
                             " deviates from 1; channel not stochastic");
  const int idx = detail::draw_atom(masses, total, rng);
  if (idx < 0) throw std::runtime_error("kernel_step: no admissible atom");
  return {ProjectivePoint::from(mat_vec(pairs[idx].op, xhat.x)), idx};
}

// --- Markov operator (exact pushforward) ----------------------------------------

/// Exact pushforward of a finitely supported measure: every (point, atom)
/// pair with mass above the floor is emitted, images closer than the merge
/// tolerance are pooled, and sub-threshold mass is discarded (logged).
inline EmpiricalMeasure markov_operator_apply(const EmpiricalMeasure& nu, const Channel& ch) {
  const auto& pairs = ch.family().pairs;
  EmpiricalMeasure out;
  double discarded = 0.0;
  for (size_t j = 0; j < nu.points.size(); ++j) {
    for (const auto& p : pairs) {
      const CVector kx = mat_vec(p.op, nu.points[j].x);
      const double n2 = vnorm(kx);
      const double mass = nu.weights[j] * p.weight * n2 * n2;
      if (mass <= kKernelMassFloor) {
        discarded += mass;
        continue;
      }
      ProjectivePoint img = ProjectivePoint::from(kx);
      bool merged = false;
      for (size_t t = 0; t < out.points.size(); ++t) {
        if (proj_distance(out.points[t], img) <= kPointMergeTolerance) {
          out.weights[t] += mass;
          merged = true;
          break;
        }
      }
      if (!merged) {
        out.points.push_back(std::move(img));
        out.weights.push_back(mass);
      }
    }
  }
  if (discarded > 0.0)
    warn("markov_operator_apply: discarded sub-threshold mass " + std::to_string(discarded));
  return out;
}

/// Total-variation distance between finitely supported measures, matching
/// points up to the merge tolerance.
inline double total_variation(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<bool> used(b.points.size(), false);
  double tv = 0.0;
  for (size_t i = 0; i < a.points.size(); ++i) {
    double wb = 0.0;
    for (size_t j = 0; j < b.points.size(); ++j) {
      if (!used[j] && proj_distance(a.points[i], b.points[j]) <= 10 * kPointMergeTolerance) {
        wb = b.weights[j];
        used[j] = true;
        break;
      }
    }
    tv += std::abs(a.weights[i] - wb);
  }
  for (size_t j = 0; j < b.points.size(); ++j)
    if (!used[j]) tv += b.weights[j];
  return 0.5 * tv;
}

/// Iterates the exact pushforward until the total-variation change drops
/// below tol. Works whenever orbits stay finitely supported (all the worked
/// examples); gives up when the support exceeds the cap.
inline std::optional<EmpiricalMeasure> invariant_measure_pushforward(
    const Channel& ch, EmpiricalMeasure nu, double tol = 1e-10, int max_iter = 10000,
    size_t support_cap = 10000) {
  for (int it = 0; it < max_iter; ++it) {
    EmpiricalMeasure next = markov_operator_apply(nu, ch);
    if (next.points.size() > support_cap) return std::nullopt;
    if (total_variation(nu, next) < tol) return next;
    nu = std::move(next);
  }
  return std::nullopt;
}

// --- Feller operator --------------------------------------------------------------

/// Uf(x) = sum_i w_i f(K_i . x) |K_i x|^2; zero-mass terms contribute 0.
inline Complex feller_apply(const std::function<Complex(const ProjectivePoint&)>& f,
                            const ProjectivePoint& xhat, const Channel& ch) {
  Complex acc = 0.0;
  for (const auto& p : ch.family().pairs) {
    const CVector kx = mat_vec(p.op, xhat.x);
    const double n2 = vnorm(kx);
    if (n2 * n2 * p.weight <= 0.0) continue;
    acc += p.weight * n2 * n2 * f(ProjectivePoint::from(kx));
  }
  return acc;
}

// --- Simulation --------------------------------------------------------------------

struct TrajectoryConfig {
  long n_steps = 1000;
  long burn_in = 100;
  int n_chains = 1;
  uint64_t seed = 1;
  bool record_paths = false;

  void validate() const {
    if (n_steps <= 0 || n_chains <= 0) throw std::invalid_argument("TrajectoryConfig: sizes");
    if (burn_in < 0 || burn_in >= n_steps)
      throw std::invalid_argument("TrajectoryConfig: need burn_in < n_steps");
  }
};

inline int thread_budget_from_env() {
  if (const char* env = std::getenv("QCHAN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

struct SimulationResult {
  EmpiricalMeasure empirical;                  // pooled post-burn-in states
  std::vector<ComplexMatrix> chain_barycenters;
  ComplexMatrix pooled_barycenter;
  double barycenter_spread = 0.0;              // max pairwise HS distance
  long pooled_samples = 0;
  std::vector<std::vector<ProjectivePoint>> paths;  // per chain, when recorded
};

/// Runs independent chains of the projective kernel (per-chain RNG streams
/// derived from seed and chain index) and pools the post-burn-in states with
/// equal weights.
inline SimulationResult simulate(const Channel& ch, const ProjectivePoint& x0,
                                 const TrajectoryConfig& cfg) {
  cfg.validate();
  const auto st = is_stochastic(ch, 1e-6);
  if (!st.stochastic)
    throw std::invalid_argument("simulate: channel not stochastic (residual " +
                                std::to_string(st.residual) + ")");
  const int k = ch.dim();
  const long kept_per_chain = cfg.n_steps - cfg.burn_in;

  struct ChainOut {
    std::vector<ProjectivePoint> kept;
    std::vector<ProjectivePoint> path;
    ComplexMatrix barycenter;
  };
  std::vector<ChainOut> outs(cfg.n_chains);

  auto run_chain = [&](int c) {
    RngStream rng = RngStream::chain_stream(cfg.seed, static_cast<uint64_t>(c));
    ProjectivePoint x = x0;
    ChainOut& out = outs[c];
    out.barycenter = ComplexMatrix(k, k);
    out.kept.reserve(kept_per_chain);
    if (cfg.record_paths) out.path.reserve(cfg.n_steps + 1);
    if (cfg.record_paths) out.path.push_back(x);
    for (long s = 0; s < cfg.n_steps; ++s) {
      x = kernel_step(ch, x, rng).point;
      if (cfg.record_paths) out.path.push_back(x);
      if (s >= cfg.burn_in) {
        out.kept.push_back(x);
        out.barycenter += projector(x.x);
      }
    }
    out.barycenter *= Complex(1.0 / kept_per_chain, 0.0);
  };

  const int budget = std::min(thread_budget_from_env(), cfg.n_chains);
  if (budget <= 1) {
    for (int c = 0; c < cfg.n_chains; ++c) run_chain(c);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int t = 0; t < budget; ++t)
      workers.emplace_back([&]() {
        for (int c = next.fetch_add(1); c < cfg.n_chains; c = next.fetch_add(1)) run_chain(c);
      });
    for (auto& w : workers) w.join();
  }

  SimulationResult res;
  res.pooled_samples = kept_per_chain * cfg.n_chains;
  const double w = 1.0 / res.pooled_samples;
  constexpr size_t kMergeSupportCap = 4096;  // beyond this, samples are kept raw
  for (auto& out : outs) {
    for (auto& pt : out.kept) {
      bool merged = false;
      if (res.empirical.points.size() <= kMergeSupportCap) {
        for (size_t t = 0; t < res.empirical.points.size(); ++t) {
          if (proj_distance(res.empirical.points[t], pt) <= kPointMergeTolerance) {
            res.empirical.weights[t] += w;
            merged = true;
            break;
          }
        }
      }
      if (!merged) {
        res.empirical.points.push_back(std::move(pt));
        res.empirical.weights.push_back(w);
      }
    }
    res.chain_barycenters.push_back(std::move(out.barycenter));
    if (cfg.record_paths) res.paths.push_back(std::move(out.path));
  }
  res.pooled_barycenter = barycenter(res.empirical);
  for (size_t a = 0; a < res.chain_barycenters.size(); ++a)
    for (size_t b = a + 1; b < res.chain_barycenters.size(); ++b)
      res.barycenter_spread = std::max(
          res.barycenter_spread, hs_norm(res.chain_barycenters[a] - res.chain_barycenters[b]));
  return res;
}

// --- Quantum trajectories -------------------------------------------------------

struct QuantumTrajectory {
  std::vector<ComplexMatrix> densities;  // rho_1 .. rho_n
  std::vector<int> atom_indices;
};

/// Density-valued chain: atom i with probability w_i tr(K_i rho K_i^dagger),
/// then rho -> K_i rho K_i^dagger / tr. Consumes one uniform per step, in
/// lockstep with kernel_step under a shared stream.
inline QuantumTrajectory quantum_trajectory(const Channel& ch, ComplexMatrix rho, long n_steps,
                                            RngStream& rng) {
  const auto& pairs = ch.family().pairs;
  QuantumTrajectory out;
  out.densities.reserve(n_steps);
  out.atom_indices.reserve(n_steps);
  for (long s = 0; s < n_steps; ++s) {
    std::vector<double> masses(pairs.size());
    double total = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i) {
      masses[i] = pairs[i].weight * trace(pairs[i].op * rho * adjoint(pairs[i].op)).real();
      total += masses[i];
    }
    if (total < 1e-12)
      throw std::runtime_error("quantum_trajectory: state annihilated by the whole family");
    if (std::abs(total - 1.0) > 1e-6)
      throw std::runtime_error("quantum_trajectory: step mass " + std::to_string(total) +
                               " deviates from 1; channel not stochastic");
    const int idx = detail::draw_atom(masses, total, rng);
    if (idx < 0) throw std::runtime_error("quantum_trajectory: no admissible atom");
    rho = pairs[idx].op * rho * adjoint(pairs[idx].op);
    rho *= Complex(1.0 / trace(rho).real(), 0.0);
    out.densities.push_back(rho);
    out.atom_indices.push_back(idx);
  }
  return out;
}

inline QuantumTrajectory quantum_trajectory(const Channel& ch, const ComplexMatrix& rho0,
                                            const TrajectoryConfig& cfg) {
  cfg.validate();
  RngStream rng = RngStream::chain_stream(cfg.seed, 0);
  return quantum_trajectory(ch, rho0, cfg.n_steps, rng);
}

// --- Cylinder probabilities -------------------------------------------------------

/// Probability of the finite word (i_1 .. i_n):
///   (prod_t w_{i_t}) tr(W rho W^dagger),  W = K_{i_n} ... K_{i_1}.
inline double word_probability(const Channel& ch, const ComplexMatrix& rho,
                               const std::vector<int>& word) {
  const auto& pairs = ch.family().pairs;
  ComplexMatrix w = ComplexMatrix::identity(ch.dim());
  double weight = 1.0;
  for (int idx : word) {
    if (idx < 0 || idx >= static_cast<int>(pairs.size()))
      throw std::invalid_argument("word_probability: atom index out of range");
    w = pairs[idx].op * w;
    weight *= pairs[idx].weight;
  }
  return weight * trace(w * rho * adjoint(w)).real();
}

}  // namespace qchan
