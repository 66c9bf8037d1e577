#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qchan/complex_matrix.hpp"

namespace qchan {

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct HermitianEigen {
  std::vector<double> eigenvalues;
  ComplexMatrix eigenvectors;
};

/// Cyclic Jacobi for hermitian matrices. Unconditionally stable and ample for
/// the sizes handled here (k up to a few dozen).
inline HermitianEigen hermitian_eigen(const ComplexMatrix& a_in, double tol = 1e-14,
                                      int max_sweeps = 64) {
  if (!a_in.square()) throw std::invalid_argument("hermitian_eigen: non-square input");
  if (!is_hermitian(a_in)) throw std::invalid_argument("hermitian_eigen: input not hermitian");
  const int n = a_in.dim();
  ComplexMatrix a = hermitize(a_in);  // scrub roundoff asymmetry
  ComplexMatrix v = ComplexMatrix::identity(n);
  const double scale = hs_norm(a);
  if (scale == 0.0) return {std::vector<double>(n, 0.0), v};

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= tol * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double beta = std::abs(apq);
        if (beta <= 1e-300) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        // Phase out a_pq, then a real 2x2 rotation annihilates it.
        const Complex phase = apq / beta;
        const double alpha = a(p, p).real();
        const double gamma = a(q, q).real();
        const double tau = (gamma - alpha) / (2.0 * beta);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // Column p of the rotation: (c, -s*conj(phase)); column q: (s, c*conj(phase)).
        const Complex jp_q = -s * std::conj(phase);
        const Complex jq_q = c * std::conj(phase);

        // A <- J^dagger A J, applied as column then row updates.
        for (int r = 0; r < n; ++r) {
          const Complex arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp + jp_q * arq;
          a(r, q) = s * arp + jq_q * arq;
        }
        for (int cidx = 0; cidx < n; ++cidx) {
          const Complex apc = a(p, cidx), aqc = a(q, cidx);
          a(p, cidx) = c * apc + std::conj(jp_q) * aqc;
          a(q, cidx) = s * apc + std::conj(jq_q) * aqc;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = Complex(a(p, p).real(), 0.0);
        a(q, q) = Complex(a(q, q).real(), 0.0);
        for (int r = 0; r < n; ++r) {
          const Complex vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp + jp_q * vrq;
          v(r, q) = s * vrp + jq_q * vrq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });
  HermitianEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]).real();
    for (int i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

inline double min_eigenvalue(const ComplexMatrix& a) {
  return hermitian_eigen(a).eigenvalues.front();
}

/// rho = rho_plus - rho_minus with both PSD and rho_plus rho_minus = 0,
/// split along the spectral decomposition.
inline std::pair<ComplexMatrix, ComplexMatrix> positive_part_split(const ComplexMatrix& rho) {
  if (!is_hermitian(rho)) throw std::invalid_argument("positive_part_split: input not hermitian");
  const auto eig = hermitian_eigen(rho);
  const int n = rho.dim();
  ComplexMatrix plus(n, n), minus(n, n);
  for (int j = 0; j < n; ++j) {
    CVector u(n);
    for (int i = 0; i < n; ++i) u[i] = eig.eigenvectors(i, j);
    const ComplexMatrix p = outer(u, u);
    const double lam = eig.eigenvalues[j];
    if (lam >= 0.0)
      plus += p * lam;
    else
      minus += p * (-lam);
  }
  return {plus, minus};
}

/// Applies f to the spectrum of a hermitian matrix.
template <class F>
ComplexMatrix hermitian_function(const ComplexMatrix& a, F&& f) {
  const auto eig = hermitian_eigen(a);
  const int n = a.dim();
  ComplexMatrix r(n, n);
  for (int j = 0; j < n; ++j) {
    CVector u(n);
    for (int i = 0; i < n; ++i) u[i] = eig.eigenvectors(i, j);
    r += outer(u, u) * f(eig.eigenvalues[j]);
  }
  return r;
}

/// PSD square root; eigenvalues above -1e-12*(1+|A|) are clamped to zero,
/// anything lower is rejected.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& a) {
  const double floor = -1e-12 * (1.0 + hs_norm(a));
  const auto eig = hermitian_eigen(a);
  if (eig.eigenvalues.front() < floor)
    throw std::domain_error("hermitian_sqrt: eigenvalue " +
                            std::to_string(eig.eigenvalues.front()) + " below PSD tolerance");
  return hermitian_function(a, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

/// Inverse square root of a strictly positive definite matrix.
inline ComplexMatrix hermitian_inv_sqrt(const ComplexMatrix& a) {
  const double scale = hs_norm(a);
  const auto eig = hermitian_eigen(a);
  if (eig.eigenvalues.front() <= 1e-10 * scale)
    throw std::domain_error("hermitian_inv_sqrt: min eigenvalue " +
                            std::to_string(eig.eigenvalues.front()) +
                            " too close to singular");
  return hermitian_function(a, [](double x) { return 1.0 / std::sqrt(x); });
}

/// Largest singular value (operator norm), via the spectrum of A^dagger A.
inline double op_norm(const ComplexMatrix& a) {
  const ComplexMatrix ata = adjoint(a) * a;
  const auto eig = hermitian_eigen(ata);
  return std::sqrt(std::max(0.0, eig.eigenvalues.back()));
}

}  // namespace qchan
