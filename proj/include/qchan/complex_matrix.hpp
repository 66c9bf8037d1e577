#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qchan {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

/// Dense complex matrix, row-major. The workhorse container for channel
/// inputs v, Kraus operators K, densities rho and superoperators.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("ComplexMatrix: nonpositive dims");
  }

  static ComplexMatrix zeros(int rows, int cols) { return ComplexMatrix(rows, cols); }
  static ComplexMatrix identity(int k) {
    ComplexMatrix m(k, k);
    for (int i = 0; i < k; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  /// Side length; matrices handed across module boundaries are square.
  int dim() const {
    if (!square()) throw std::logic_error("ComplexMatrix::dim on non-square matrix");
    return rows_;
  }

  Complex& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const Complex& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  const std::vector<Complex>& data() const { return data_; }
  std::vector<Complex>& data() { return data_; }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    check_same_shape(o);
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    check_same_shape(o);
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  ComplexMatrix& operator*=(Complex c) {
    for (auto& v : data_) v *= c;
    return *this;
  }

 private:
  void check_same_shape(const ComplexMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw std::invalid_argument("ComplexMatrix: shape mismatch");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Complex> data_;
};

inline ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
inline ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
inline ComplexMatrix operator*(ComplexMatrix a, Complex c) { return a *= c; }
inline ComplexMatrix operator*(Complex c, ComplexMatrix a) { return a *= c; }
inline ComplexMatrix operator*(ComplexMatrix a, double c) { return a *= Complex(c, 0.0); }
inline ComplexMatrix operator*(double c, ComplexMatrix a) { return a *= Complex(c, 0.0); }

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
  ComplexMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int l = 0; l < a.cols(); ++l) {
      const Complex ail = a(i, l);
      if (ail == Complex(0.0)) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += ail * b(l, j);
    }
  return c;
}

inline ComplexMatrix adjoint(const ComplexMatrix& a) {
  ComplexMatrix r(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
  return r;
}

inline ComplexMatrix transpose(const ComplexMatrix& a) {
  ComplexMatrix r(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
  return r;
}

inline ComplexMatrix conjugate(const ComplexMatrix& a) {
  ComplexMatrix r(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(i, j) = std::conj(a(i, j));
  return r;
}

inline Complex trace(const ComplexMatrix& a) {
  const int n = std::min(a.rows(), a.cols());
  Complex t = 0.0;
  for (int i = 0; i < n; ++i) t += a(i, i);
  return t;
}

/// Hilbert-Schmidt product tr(A B^dagger); conjugate-linear in B.
inline Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hs_inner: dimension mismatch");
  Complex s = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * std::conj(b.data()[i]);
  return s;
}

inline double fro_norm(const ComplexMatrix& a) {
  double s = 0.0;
  for (const auto& v : a.data()) s += std::norm(v);
  return std::sqrt(s);
}

/// Alias: the Hilbert-Schmidt norm induced by hs_inner.
inline double hs_norm(const ComplexMatrix& a) { return fro_norm(a); }

inline double max_abs(const ComplexMatrix& a) {
  double m = 0.0;
  for (const auto& v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline bool is_hermitian(const ComplexMatrix& a, double tol_scale = 1e-12) {
  if (!a.square()) return false;
  const double tol = tol_scale * (1.0 + hs_norm(a));
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i; j < a.cols(); ++j)
      if (std::abs(a(i, j) - std::conj(a(j, i))) > tol) return false;
  return true;
}

inline ComplexMatrix hermitize(const ComplexMatrix& a) {
  ComplexMatrix r(a.dim(), a.dim());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return r;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const Complex aij = a(i, j);
      if (aij == Complex(0.0)) continue;
      for (int p = 0; p < b.rows(); ++p)
        for (int q = 0; q < b.cols(); ++q)
          r(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
    }
  return r;
}

// --- vector helpers -------------------------------------------------------

inline CVector mat_vec(const ComplexMatrix& a, const CVector& x) {
  if (a.cols() != static_cast<int>(x.size()))
    throw std::invalid_argument("mat_vec: dimension mismatch");
  CVector y(a.rows(), Complex(0.0));
  for (int i = 0; i < a.rows(); ++i) {
    Complex s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

/// Standard inner product <x, y>, conjugate-linear in the first slot.
inline Complex vdot(const CVector& x, const CVector& y) {
  Complex s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

inline double vnorm(const CVector& x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return std::sqrt(s);
}

inline void vscale(CVector& x, Complex c) {
  for (auto& v : x) v *= c;
}

/// Row-major vectorization: vec(A rho B) = (A kron B^T) vec(rho).
inline CVector mat_to_vec(const ComplexMatrix& a) { return a.data(); }

inline ComplexMatrix vec_to_mat(const CVector& v, int k) {
  if (static_cast<int>(v.size()) != k * k) throw std::invalid_argument("vec_to_mat: bad size");
  ComplexMatrix m(k, k);
  m.data() = v;
  return m;
}

inline ComplexMatrix outer(const CVector& x, const CVector& y) {
  ComplexMatrix m(static_cast<int>(x.size()), static_cast<int>(y.size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = x[i] * std::conj(y[j]);
  return m;
}

/// Dense inverse by Gauss-Jordan with partial pivoting; small matrices only.
inline ComplexMatrix inverse(const ComplexMatrix& a) {
  const int n = a.dim();
  ComplexMatrix w = a;
  ComplexMatrix inv = ComplexMatrix::identity(n);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(w(r, col)) > std::abs(w(piv, col))) piv = r;
    if (std::abs(w(piv, col)) < 1e-300) throw std::domain_error("inverse: singular matrix");
    if (piv != col)
      for (int c = 0; c < n; ++c) {
        std::swap(w(piv, c), w(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    const Complex d = w(col, col);
    for (int c = 0; c < n; ++c) {
      w(col, c) /= d;
      inv(col, c) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const Complex f = w(r, col);
      if (f == Complex(0.0)) continue;
      for (int c = 0; c < n; ++c) {
        w(r, c) -= f * w(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

/// Projector |x><x| for a (not necessarily normalized) vector.
inline ComplexMatrix projector(const CVector& x) {
  const double n2 = vnorm(x);
  if (n2 == 0.0) throw std::invalid_argument("projector: zero vector");
  ComplexMatrix p = outer(x, x);
  p *= Complex(1.0 / (n2 * n2), 0.0);
  return p;
}

}  // namespace qchan
