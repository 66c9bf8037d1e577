#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qchan/complex_matrix.hpp"
#include "qchan/dominant_eigen.hpp"
#include "qchan/hermitian_eigen.hpp"
#include "qchan/measure.hpp"
#include "qchan/subspace.hpp"

namespace qchan {

/// The quantum channel phi_L(rho) = sum_i w_i K_i rho K_i^dagger together
/// with its cached k^2 x k^2 superoperator sum_i w_i K_i (x) conj(K_i)
/// (row-major vectorization). The cache is built eagerly so instances are
/// freely shareable across workers.
class Channel {
 public:
  explicit Channel(KrausFamily family) : family_(std::move(family)) {
    const int k = family_.dim;
    superop_ = ComplexMatrix(k * k, k * k);
    for (const auto& p : family_.pairs) superop_ += kron(p.op, conjugate(p.op)) * p.weight;
  }

  int dim() const { return family_.dim; }
  const KrausFamily& family() const { return family_; }
  const ComplexMatrix& superoperator() const { return superop_; }
  ComplexMatrix dual_superoperator() const { return adjoint(superop_); }

  /// Direct Kraus-sum action; preserves hermiticity and positivity.
  ComplexMatrix apply(const ComplexMatrix& rho) const {
    if (rho.dim() != dim()) throw std::invalid_argument("Channel::apply: dim mismatch");
    ComplexMatrix out(dim(), dim());
    for (const auto& p : family_.pairs) out += (p.op * rho * adjoint(p.op)) * p.weight;
    return out;
  }

  ComplexMatrix apply_dual(const ComplexMatrix& rho) const {
    if (rho.dim() != dim()) throw std::invalid_argument("Channel::apply_dual: dim mismatch");
    ComplexMatrix out(dim(), dim());
    for (const auto& p : family_.pairs) out += (adjoint(p.op) * rho * p.op) * p.weight;
    return out;
  }

  /// phi^n(rho) by repeated superoperator application (polynomial cost, never
  /// Kraus-word expansion).
  ComplexMatrix iterate(const ComplexMatrix& rho, long n) const {
    CVector x = mat_to_vec(rho);
    for (long i = 0; i < n; ++i) x = mat_vec(superop_, x);
    return vec_to_mat(x, dim());
  }

 private:
  KrausFamily family_;
  ComplexMatrix superop_;
};

struct StochasticityReport {
  bool stochastic = false;
  double residual = 0.0;
};

/// phi is stochastic when phi^*(Id) = Id; the residual is reported either way.
inline StochasticityReport is_stochastic(const Channel& ch, double tol = 1e-9) {
  const ComplexMatrix r = ch.apply_dual(ComplexMatrix::identity(ch.dim()));
  const double residual = hs_norm(r - ComplexMatrix::identity(ch.dim()));
  return {residual <= tol, residual};
}

// --- Choi matrices -----------------------------------------------------------

/// sum_ij E_ij (x) phi(E_ij); PSD iff phi is completely positive.
inline ComplexMatrix choi_matrix(const KrausFamily& fam) {
  const int k = fam.dim;
  ComplexMatrix c(k * k, k * k);
  for (const auto& p : fam.pairs) {
    CVector u(static_cast<size_t>(k) * k);
    for (int i = 0; i < k; ++i)
      for (int a = 0; a < k; ++a) u[static_cast<size_t>(i) * k + a] = p.op(a, i);
    c += outer(u, u) * p.weight;
  }
  return c;
}

/// Choi matrix from a raw superoperator (the reshuffle); lets non-Kraus maps
/// such as the transpose be tested for complete positivity.
inline ComplexMatrix choi_from_superoperator(const ComplexMatrix& superop, int k) {
  if (superop.dim() != k * k) throw std::invalid_argument("choi_from_superoperator: bad dims");
  ComplexMatrix c(k * k, k * k);
  for (int i = 0; i < k; ++i)
    for (int a = 0; a < k; ++a)
      for (int j = 0; j < k; ++j)
        for (int b = 0; b < k; ++b)
          c(i * k + a, j * k + b) = superop(a * k + b, i * k + j);
  return c;
}

// --- Perron-Frobenius spectral data ------------------------------------------

/// (lambda_L, rho_L, sigma_L) with tr rho_L = 1 and tr(sigma_L rho_L) = 1;
/// `simple` records whether the deflated gap establishes simplicity of the
/// spectral radius.
struct SpectralData {
  double lambda = 0.0;
  ComplexMatrix rho;
  ComplexMatrix sigma;
  bool simple = false;
  double gap = 0.0;          // lambda - |lambda_2|, clamped at 0
  Complex lambda2 = 0.0;     // dominant eigenvalue after one deflation step
  bool converged = true;
};

struct SpectralOptions {
  double tol = 1e-13;
  int max_iter = 200000;
  double simple_gap_factor = 1e-8;  // simple iff gap > factor * lambda
};

namespace detail {

/// Reshape, phase-fix, symmetrize and clamp a dominant eigenvector into a
/// hermitian PSD matrix. Power iteration returns an arbitrary complex phase;
/// the Perron eigenmatrix is hermitian PSD, so this only removes noise.
inline ComplexMatrix eigenvector_to_density(const CVector& vec, int k, const char* what) {
  ComplexMatrix raw = vec_to_mat(vec, k);
  const Complex t = trace(raw);
  if (std::abs(t) > 1e-12) raw *= std::conj(t) / std::abs(t);
  ComplexMatrix h = hermitize(raw);
  const auto eig = hermitian_eigen(h);
  const double top = std::max(std::abs(eig.eigenvalues.front()), std::abs(eig.eigenvalues.back()));
  if (top <= 0.0) throw std::runtime_error(std::string(what) + ": zero eigenmatrix");
  if (eig.eigenvalues.front() < -1e-8 * top)
    throw std::runtime_error(std::string(what) +
                             ": negative eigen-matrix after symmetrization (min eig " +
                             std::to_string(eig.eigenvalues.front()) +
                             "); reducibility or numerical failure");
  ComplexMatrix out(k, k);
  for (int j = 0; j < k; ++j) {
    CVector u(k);
    for (int i = 0; i < k; ++i) u[i] = eig.eigenvectors(i, j);
    out += outer(u, u) * std::max(eig.eigenvalues[j], 0.0);
  }
  return out;
}

}  // namespace detail

inline SpectralData spectral_data(const Channel& ch, const SpectralOptions& opts = {}) {
  const int k = ch.dim();
  const ComplexMatrix& m = ch.superoperator();
  const double scale = std::max(fro_norm(m), 1e-300);
  const CVector start = mat_to_vec(ComplexMatrix::identity(k) * (1.0 / k));

  detail::PowerResult right = detail::power_iterate(m, start, opts.tol, opts.max_iter, scale);
  for (uint64_t att = 1; !right.converged && att <= 3; ++att)
    right = detail::power_iterate(m, detail::seeded_start(k * k, 0x51ab5ull * att), opts.tol,
                                  opts.max_iter, scale);
  const ComplexMatrix mh = adjoint(m);
  detail::PowerResult left = detail::power_iterate(mh, start, opts.tol, opts.max_iter, scale);
  for (uint64_t att = 1; !left.converged && att <= 3; ++att)
    left = detail::power_iterate(mh, detail::seeded_start(k * k, 0x7ea5ull * att), opts.tol,
                                 opts.max_iter, scale);

  SpectralData sd;
  sd.converged = right.converged && left.converged;
  if (right.converged) {
    if (std::abs(right.lambda.imag()) > 1e-10 * std::max(1.0, std::abs(right.lambda)))
      throw std::runtime_error("spectral_data: dominant eigenvalue has imaginary part " +
                               std::to_string(right.lambda.imag()));
    sd.lambda = right.lambda.real();
  } else {
    // Peripheral degeneracy: report the modulus of the last Rayleigh
    // snapshot with simplicity left unestablished.
    sd.lambda = std::abs(right.lambda);
  }
  if (sd.lambda <= 0.0)
    throw std::runtime_error("spectral_data: nonpositive spectral radius estimate");

  sd.rho = detail::eigenvector_to_density(right.x, k, "spectral_data[rho]");
  const double tr_rho = trace(sd.rho).real();
  if (tr_rho <= 1e-300) throw std::runtime_error("spectral_data: traceless rho");
  sd.rho *= 1.0 / tr_rho;

  sd.sigma = detail::eigenvector_to_density(left.x, k, "spectral_data[sigma]");
  const double pairing = hs_inner(sd.sigma, sd.rho).real();  // tr(sigma rho), both hermitian
  if (std::abs(pairing) <= 1e-12)
    throw std::runtime_error("spectral_data: tr(sigma rho) vanishes; cannot normalize sigma");
  sd.sigma *= 1.0 / pairing;

  // Second eigenvalue by one Wielandt deflation step using the left
  // eigenvector. Simplicity of lambda is decided by the distance of
  // lambda_2 from lambda in the complex plane: peripheral eigenvalues of
  // equal modulus but different phase (period structure) do not contradict
  // a simple spectral radius. A non-convergent deflated iteration leaves
  // simplicity not established.
  sd.gap = 0.0;
  sd.simple = false;
  if (sd.converged) {
    const Complex yx = vdot(left.x, right.x);
    if (std::abs(yx) > 1e-12) {
      ComplexMatrix m2 = m;
      const Complex coef = right.lambda / yx;
      const int n = k * k;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m2(i, j) -= coef * right.x[i] * std::conj(left.x[j]);
      detail::PowerResult second =
          detail::power_iterate(m2, detail::seeded_start(n, 0xd1b54a32d192ed03ull), 1e-9,
                                std::min(opts.max_iter, 20000), scale);
      if (second.converged) {
        sd.lambda2 = second.lambda;
        sd.gap = std::max(0.0, sd.lambda - std::abs(second.lambda));
        sd.simple = std::abs(sd.lambda2 - Complex(sd.lambda)) > opts.simple_gap_factor * sd.lambda;
      } else {
        // Equal-modulus subdominant eigenvalues defeat the point estimate, but
        // the growth rate of the deflated iteration still pins their modulus.
        CVector z = detail::seeded_start(n, 0x94d049bb133111ebull);
        vscale(z, Complex(1.0 / vnorm(z), 0.0));
        const int iters = 6000;
        double logsum = 0.0;
        int count = 0;
        for (int i = 0; i < iters; ++i) {
          z = mat_vec(m2, z);
          const double nz = vnorm(z);
          if (nz < 1e-300) {
            logsum = -std::numeric_limits<double>::infinity();
            count = 1;
            break;
          }
          if (i >= iters / 2) {
            logsum += std::log(nz);
            ++count;
          }
          vscale(z, Complex(1.0 / nz, 0.0));
        }
        const double growth = count > 0 ? std::exp(logsum / count) : 0.0;
        sd.lambda2 = Complex(growth, 0.0);
        sd.gap = std::max(0.0, sd.lambda - growth);
        // Conservative threshold: the growth estimate is noisier than a
        // converged point estimate.
        sd.simple = sd.gap > 1e-6 * sd.lambda;
      }
    }
  }
  return sd;
}

// --- Normalization -----------------------------------------------------------

/// K_hat_i = lambda^{-1/2} sigma^{1/2} K_i sigma^{-1/2}; the output channel is
/// stochastic with spectral radius 1 and rho_hat = sigma^{1/2} rho sigma^{1/2}.
inline Channel normalize(const Channel& ch, const SpectralData& sd) {
  const auto sig_eig = hermitian_eigen(sd.sigma);
  if (sig_eig.eigenvalues.front() <= 1e-10)
    throw std::runtime_error("normalize: sigma_L not positive definite (min eigenvalue " +
                             std::to_string(sig_eig.eigenvalues.front()) +
                             "); channel not normalizable in this numerical regime");
  const ComplexMatrix s = hermitian_sqrt(sd.sigma);
  const ComplexMatrix si = hermitian_inv_sqrt(sd.sigma);
  const double f = 1.0 / std::sqrt(sd.lambda);

  KrausFamily out;
  out.dim = ch.dim();
  out.measure_mass = ch.family().measure_mass;
  std::vector<ComplexMatrix> ops;
  for (const auto& p : ch.family().pairs) {
    ComplexMatrix khat = (s * p.op * si) * f;
    ops.push_back(khat);
    out.pairs.push_back({p.weight, p.point, std::move(khat)});
  }
  out.lmap = TableMap{std::move(ops)};
  return Channel(std::move(out));
}

inline Channel normalize(const Channel& ch) { return normalize(ch, spectral_data(ch)); }

// --- Temporal means -----------------------------------------------------------

/// (1/N) sum_{n=1..N} phi^n(rho0); for irreducible stochastic channels this
/// converges to rho_L.
inline ComplexMatrix time_average(const Channel& ch, const ComplexMatrix& rho0, long n_steps) {
  if (n_steps < 1) throw std::invalid_argument("time_average: need N >= 1");
  const int k = ch.dim();
  CVector x = mat_to_vec(rho0);
  CVector acc(x.size(), Complex(0.0));
  for (long n = 0; n < n_steps; ++n) {
    x = mat_vec(ch.superoperator(), x);
    for (size_t i = 0; i < x.size(); ++i) acc[i] += x[i];
  }
  for (auto& v : acc) v /= static_cast<double>(n_steps);
  return vec_to_mat(acc, k);
}

struct TimeAverageReport {
  ComplexMatrix average;
  double distance_to_rho = 0.0;
};

inline TimeAverageReport time_average(const Channel& ch, const ComplexMatrix& rho0, long n_steps,
                                      const SpectralData& sd) {
  TimeAverageReport rep;
  rep.average = time_average(ch, rho0, n_steps);
  rep.distance_to_rho = hs_norm(rep.average - sd.rho);
  return rep;
}

// --- Irreducibility ------------------------------------------------------------

enum class Verdict { Irreducible, Reducible, Undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Irreducible: return "irreducible";
    case Verdict::Reducible: return "reducible";
    default: return "undetermined";
  }
}

struct IrreducibilityReport {
  Verdict verdict = Verdict::Undetermined;
  bool spectral_primary = false;
  double min_eig_rho = 0.0;
  double min_eig_sigma = 0.0;
  double gap = 0.0;
  bool simple = false;
  std::vector<SubspaceBasis> invariant_subspaces;
  int probe_failures = 0;
  std::string detail;
};

/// Layered test. Primary: simplicity of lambda plus strict positivity of both
/// eigenmatrices. When that fails, a certified common invariant subspace
/// (checked through the trace criterion tr[B phi^n(A)] on projectors built
/// from it) yields a hard "reducible"; a randomized rank-1 probe acts as an
/// additional falsifier. Anything else stays undetermined.
inline IrreducibilityReport irreducibility_report(const Channel& ch,
                                                  const SpectralData* sd_in = nullptr) {
  IrreducibilityReport rep;
  const int k = ch.dim();

  std::optional<SpectralData> sd_local;
  const SpectralData* sd = sd_in;
  if (!sd) {
    try {
      sd_local = spectral_data(ch);
      sd = &*sd_local;
    } catch (const std::exception& e) {
      rep.detail = std::string("spectral data unavailable: ") + e.what();
    }
  }
  if (sd) {
    rep.min_eig_rho = min_eigenvalue(sd->rho);
    rep.min_eig_sigma = min_eigenvalue(sd->sigma);
    rep.gap = sd->gap;
    rep.simple = sd->simple;
    rep.spectral_primary =
        sd->simple && rep.min_eig_rho > 1e-9 && rep.min_eig_sigma > 1e-9;
    if (rep.spectral_primary) {
      rep.verdict = Verdict::Irreducible;
      return rep;
    }
  }

  // Secondary: certified invariant subspaces. phi^n runs on the cached
  // superoperator.
  rep.invariant_subspaces = invariant_subspace_search(ch.family());
  auto traces_vanish = [&](const ComplexMatrix& a, const ComplexMatrix& b) {
    CVector phin = mat_to_vec(a);
    for (int n = 1; n <= std::max(1, k - 1); ++n) {
      phin = mat_vec(ch.superoperator(), phin);
      if (std::abs(trace(b * vec_to_mat(phin, k))) > 1e-12) return false;
    }
    return true;
  };
  for (const auto& sub : rep.invariant_subspaces) {
    // Witness pair: A spans E, B spans the orthocomplement.
    ComplexMatrix pi(k, k);
    for (int j = 0; j < sub.basis.cols(); ++j) {
      CVector c(k);
      for (int i = 0; i < k; ++i) c[i] = sub.basis(i, j);
      pi += outer(c, c);
    }
    const ComplexMatrix a = pi * (1.0 / sub.basis.cols());
    const ComplexMatrix b = ComplexMatrix::identity(k) - pi;
    if (traces_vanish(a, b)) {
      rep.verdict = Verdict::Reducible;
      rep.detail = "certified invariant subspace of dim " + std::to_string(sub.subspace_dim());
      return rep;
    }
  }

  // Randomized criterion-4 probe as a falsifier.
  RngStream rng(0xfa151f1e5ull);
  for (int t = 0; t < 50; ++t) {
    CVector av(k), bv(k);
    for (int i = 0; i < k; ++i) {
      av[i] = Complex(rng.normal(), rng.normal());
      bv[i] = Complex(rng.normal(), rng.normal());
    }
    if (traces_vanish(projector(av), projector(bv))) ++rep.probe_failures;
  }
  if (rep.probe_failures > 0 && rep.detail.empty())
    rep.detail = "random probe found vanishing trace pairs but no subspace was certified";
  rep.verdict = Verdict::Undetermined;
  return rep;
}

}  // namespace qchan
