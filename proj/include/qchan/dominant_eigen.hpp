#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "qchan/complex_matrix.hpp"
#include "qchan/rng.hpp"

namespace qchan {

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DominantEigenpair {
  Complex lambda;
  CVector vector;      // unit norm
  double gap_estimate; // |lambda| - |lambda_2| from one deflation step
  int iterations;
};

namespace detail {

struct PowerResult {
  Complex lambda;
  CVector x;
  double residual;
  bool converged;
  int iterations;
};

inline PowerResult power_iterate(const ComplexMatrix& m, CVector x, double tol, int max_iter,
                                 double scale) {
  const double nx = vnorm(x);
  if (nx == 0.0) throw std::invalid_argument("power_iterate: zero start vector");
  vscale(x, Complex(1.0 / nx, 0.0));
  Complex lambda = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    CVector y = mat_vec(m, x);
    lambda = vdot(x, y);  // Rayleigh quotient, x unit
    double r2 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) r2 += std::norm(y[i] - lambda * x[i]);
    residual = std::sqrt(r2);
    if (residual <= tol * scale) return {lambda, x, residual, true, it};
    const double ny = vnorm(y);
    if (ny <= 1e-300) return {0.0, x, 0.0, true, it};  // reached the kernel: lambda = 0
    vscale(y, Complex(1.0 / ny, 0.0));
    x = std::move(y);
  }
  return {lambda, x, residual, false, it};
}

inline CVector ones_start(int n) { return CVector(n, Complex(1.0, 0.0)); }

inline CVector seeded_start(int n, uint64_t seed) {
  RngStream rng(seed);
  CVector x(n);
  for (auto& v : x) v = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
  return x;
}

}  // namespace detail

/// Dominant eigenpair of a general square matrix by power iteration, with a
/// single Wielandt deflation to estimate the modulus gap to the rest of the
/// spectrum. Throws NonConvergenceError when the peripheral spectrum defeats
/// power iteration (several eigenvalues of equal modulus); callers treat
/// that as "simplicity not established".
inline DominantEigenpair dominant_eigenpair(const ComplexMatrix& m, double tol = 1e-12,
                                            int max_iter = 100000,
                                            const CVector* start = nullptr) {
  if (!m.square()) throw std::invalid_argument("dominant_eigenpair: non-square matrix");
  if (tol <= 0.0) throw std::invalid_argument("dominant_eigenpair: tol must be positive");
  const int n = m.dim();
  const double scale = std::max(fro_norm(m), 1e-300);

  detail::PowerResult right =
      detail::power_iterate(m, start ? *start : detail::ones_start(n), tol, max_iter, scale);
  for (uint64_t attempt = 1; !right.converged && attempt <= 3; ++attempt)
    right = detail::power_iterate(m, detail::seeded_start(n, 0x9e3779b97f4a7c15ull * attempt),
                                  tol, max_iter, scale);
  if (!right.converged)
    throw NonConvergenceError("dominant_eigenpair: power iteration did not converge (residual " +
                              std::to_string(right.residual) + "); peripheral spectrum degenerate?");

  // Left eigenvector for the deflation M2 = M - lambda x y^dagger / (y^dagger x).
  const ComplexMatrix mh = adjoint(m);
  detail::PowerResult left =
      detail::power_iterate(mh, start ? *start : detail::ones_start(n), tol, max_iter, scale);
  if (!left.converged)
    left = detail::power_iterate(mh, detail::seeded_start(n, 0xa0761c4d1cf2e7c3ull), tol,
                                 max_iter, scale);

  double gap = 0.0;
  if (left.converged) {
    const Complex yx = vdot(left.x, right.x);
    if (std::abs(yx) > 1e-12) {
      ComplexMatrix m2 = m;
      const Complex coef = right.lambda / yx;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m2(i, j) -= coef * right.x[i] * std::conj(left.x[j]);
      // Coarse second-modulus estimate; non-convergence here only means the
      // estimate is taken from the last Rayleigh snapshot.
      detail::PowerResult second = detail::power_iterate(
          m2, detail::seeded_start(n, 0xd1b54a32d192ed03ull), 1e-6, std::min(max_iter, 5000),
          scale);
      gap = std::abs(right.lambda) - std::abs(second.lambda);
      if (gap < 0.0) gap = 0.0;
    }
  }

  return {right.lambda, right.x, gap, right.iterations};
}

}  // namespace qchan
