#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qchan/complex_matrix.hpp"

namespace qchan {

/// A = Q T Q^dagger with T upper triangular and Q unitary.
/// This is the dense brute-force spectral route (Hessenberg reduction plus
/// shifted QR); the channel runtime path uses power iteration instead and
/// the two are cross-checked in the test suite.
struct SchurDecomposition {
  ComplexMatrix t;
  ComplexMatrix q;
};

namespace detail {

// Householder reduction to upper Hessenberg form, accumulating Q.
inline void hessenberg_reduce(ComplexMatrix& a, ComplexMatrix& q) {
  const int n = a.dim();
  for (int col = 0; col < n - 2; ++col) {
    // Build the reflector for a(col+1..n-1, col).
    double xnorm2 = 0.0;
    for (int i = col + 1; i < n; ++i) xnorm2 += std::norm(a(i, col));
    if (xnorm2 <= 1e-300) continue;
    const double xnorm = std::sqrt(xnorm2);
    const Complex x0 = a(col + 1, col);
    const Complex phase = (std::abs(x0) > 0.0) ? x0 / std::abs(x0) : Complex(1.0, 0.0);
    const Complex alpha = -phase * xnorm;
    CVector v(n, Complex(0.0));
    for (int i = col + 1; i < n; ++i) v[i] = a(i, col);
    v[col + 1] -= alpha;
    double vnorm2 = 0.0;
    for (int i = col + 1; i < n; ++i) vnorm2 += std::norm(v[i]);
    if (vnorm2 <= 1e-300) continue;
    const double beta = 2.0 / vnorm2;

    // A <- H A, H = I - beta v v^dagger
    for (int j = 0; j < n; ++j) {
      Complex s = 0.0;
      for (int i = col + 1; i < n; ++i) s += std::conj(v[i]) * a(i, j);
      s *= beta;
      for (int i = col + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    // A <- A H
    for (int i = 0; i < n; ++i) {
      Complex s = 0.0;
      for (int j = col + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= beta;
      for (int j = col + 1; j < n; ++j) a(i, j) -= s * std::conj(v[j]);
    }
    // Q <- Q H
    for (int i = 0; i < n; ++i) {
      Complex s = 0.0;
      for (int j = col + 1; j < n; ++j) s += q(i, j) * v[j];
      s *= beta;
      for (int j = col + 1; j < n; ++j) q(i, j) -= s * std::conj(v[j]);
    }
  }
}

// Givens rotation zeroing b in (a, b): [c, s; -conj(s), conj(c)]^dagger-style.
struct Givens {
  Complex c;
  Complex s;
};

inline Givens make_givens(Complex a, Complex b) {
  const double na = std::abs(a), nb = std::abs(b);
  if (nb == 0.0) return {Complex(1.0), Complex(0.0)};
  const double r = std::hypot(na, nb);
  return {a / r, b / r};
}

}  // namespace detail

/// Complex Schur decomposition via Wilkinson-shifted QR on the Hessenberg
/// form. Intended for the small dense matrices this library deals with.
inline SchurDecomposition schur_decompose(const ComplexMatrix& a_in, int max_iter_per_eig = 80) {
  if (!a_in.square()) throw std::invalid_argument("schur_decompose: non-square input");
  const int n = a_in.dim();
  ComplexMatrix t = a_in;
  ComplexMatrix q = ComplexMatrix::identity(n);
  if (n == 1) return {t, q};
  detail::hessenberg_reduce(t, q);

  const double scale = std::max(fro_norm(t), 1e-300);
  const double eps = 1e-15;
  int hi = n - 1;
  int stuck = 0;
  while (hi > 0) {
    // Deflate converged subdiagonals.
    bool deflated = false;
    for (int i = hi; i >= 1; --i) {
      const double diag_mag = std::abs(t(i - 1, i - 1)) + std::abs(t(i, i));
      if (std::abs(t(i, i - 1)) <= eps * (diag_mag > 0.0 ? diag_mag : scale)) {
        t(i, i - 1) = 0.0;
        if (i == hi) {
          --hi;
          deflated = true;
          stuck = 0;
          break;
        }
      }
    }
    if (deflated) continue;
    // Active block ends at hi; find its start.
    int lo = hi;
    while (lo > 0 && std::abs(t(lo, lo - 1)) != 0.0) --lo;

    // Wilkinson shift from the trailing 2x2 of the active block.
    const Complex t11 = t(hi - 1, hi - 1), t12 = t(hi - 1, hi);
    const Complex t21 = t(hi, hi - 1), t22 = t(hi, hi);
    const Complex tr = t11 + t22;
    const Complex det = t11 * t22 - t12 * t21;
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    Complex mu1 = 0.5 * (tr + disc), mu2 = 0.5 * (tr - disc);
    Complex shift = (std::abs(mu1 - t22) < std::abs(mu2 - t22)) ? mu1 : mu2;
    if (++stuck % (max_iter_per_eig / 2) == 0)
      shift = t22 + Complex(0.75 * std::abs(t(hi, hi - 1)), 0.0);  // exceptional shift
    if (stuck > max_iter_per_eig * n)
      throw std::runtime_error("schur_decompose: QR iteration failed to converge");

    // One implicit single-shift QR sweep on the active block via Givens chase.
    std::vector<detail::Givens> gs(hi - lo);
    Complex x = t(lo, lo) - shift;
    Complex y = t(lo + 1, lo);
    for (int k = lo; k < hi; ++k) {
      const auto g = detail::make_givens(x, y);
      gs[k - lo] = g;
      // Apply G^dagger on the left to rows k, k+1.
      for (int j = std::max(0, k - 1); j < n; ++j) {
        const Complex tk = t(k, j), tk1 = t(k + 1, j);
        t(k, j) = std::conj(g.c) * tk + std::conj(g.s) * tk1;
        t(k + 1, j) = -g.s * tk + g.c * tk1;
      }
      // Apply G on the right to columns k, k+1.
      const int rmax = std::min(hi, k + 2);
      for (int i = 0; i <= rmax; ++i) {
        const Complex tik = t(i, k), tik1 = t(i, k + 1);
        t(i, k) = tik * g.c + tik1 * g.s;
        t(i, k + 1) = -tik * std::conj(g.s) + tik1 * std::conj(g.c);
      }
      for (int i = 0; i < n; ++i) {
        const Complex qik = q(i, k), qik1 = q(i, k + 1);
        q(i, k) = qik * g.c + qik1 * g.s;
        q(i, k + 1) = -qik * std::conj(g.s) + qik1 * std::conj(g.c);
      }
      if (k < hi - 1) {
        x = t(k + 1, k);
        y = t(k + 2, k);
      }
    }
  }

  // Scrub the (numerically zero) strict lower triangle.
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) t(i, j) = 0.0;
  return {t, q};
}

/// All eigenvalues (diagonal of the Schur form), unordered.
inline std::vector<Complex> dense_eigenvalues(const ComplexMatrix& a) {
  if (a.dim() == 1) return {a(0, 0)};
  const auto sd = schur_decompose(a);
  std::vector<Complex> ev(a.dim());
  for (int i = 0; i < a.dim(); ++i) ev[i] = sd.t(i, i);
  return ev;
}

inline double dense_spectral_radius(const ComplexMatrix& a) {
  double r = 0.0;
  for (const auto& ev : dense_eigenvalues(a)) r = std::max(r, std::abs(ev));
  return r;
}

/// Eigenvector for the j-th Schur eigenvalue by triangular back-substitution.
inline CVector eigenvector_from_schur(const SchurDecomposition& sd, int j) {
  const int n = sd.t.dim();
  CVector y(n, Complex(0.0));
  y[j] = 1.0;
  const Complex lam = sd.t(j, j);
  for (int i = j - 1; i >= 0; --i) {
    Complex s = 0.0;
    for (int k = i + 1; k <= j; ++k) s += sd.t(i, k) * y[k];
    Complex d = sd.t(i, i) - lam;
    if (std::abs(d) < 1e-14 * (1.0 + std::abs(lam)))
      d = Complex(1e-14 * (1.0 + std::abs(lam)), 0.0);  // near-degenerate guard
    y[i] = -s / d;
  }
  CVector x = mat_vec(sd.q, y);
  const double nx = vnorm(x);
  vscale(x, Complex(1.0 / nx, 0.0));
  return x;
}

}  // namespace qchan
