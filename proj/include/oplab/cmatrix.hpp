#pragma once

// Dense complex matrices and the error taxonomy shared by every module.
// Matrices are row-major, sized at construction, and intentionally minimal:
// the kernels in eig.hpp do the real numerical work.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace oplab {

using cplx = std::complex<double>;
using VecC = std::vector<cplx>;

enum class ErrKind {
  EmptyInput,
  Shape,
  Definiteness,
  NoPreimage,
  DegenerateQuotient,
  UnsupportedDescriptor,
  DegenerateCertificate,
  Ordering,
  Grid,
  Truncation,
  Budget,
  Input,
};

struct Error : std::runtime_error {
  ErrKind kind;
  Error(ErrKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

inline const char* errKindName(ErrKind k) {
  switch (k) {
    case ErrKind::EmptyInput: return "empty-input";
    case ErrKind::Shape: return "shape";
    case ErrKind::Definiteness: return "definiteness";
    case ErrKind::NoPreimage: return "no-preimage";
    case ErrKind::DegenerateQuotient: return "degenerate-quotient";
    case ErrKind::UnsupportedDescriptor: return "unsupported-descriptor";
    case ErrKind::DegenerateCertificate: return "degenerate-certificate";
    case ErrKind::Ordering: return "ordering";
    case ErrKind::Grid: return "grid";
    case ErrKind::Truncation: return "truncation";
    case ErrKind::Budget: return "budget";
    case ErrKind::Input: return "input";
  }
  return "unknown";
}

struct CMatrix {
  int rows = 0;
  int cols = 0;
  VecC a;

  CMatrix() = default;
  CMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {
    if (r < 0 || c < 0) throw Error(ErrKind::Shape, "negative matrix dimension");
  }

  cplx& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const cplx& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  bool empty() const { return rows == 0 || cols == 0; }
};

inline CMatrix identityMatrix(int n) {
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

inline CMatrix transpose(const CMatrix& m) {
  CMatrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

inline CMatrix conjugate(const CMatrix& m) {
  CMatrix c(m.rows, m.cols);
  for (size_t i = 0; i < m.a.size(); ++i) c.a[i] = std::conj(m.a[i]);
  return c;
}

inline CMatrix adjoint(const CMatrix& m) {
  CMatrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = std::conj(m.at(i, j));
  return t;
}

inline CMatrix matmul(const CMatrix& x, const CMatrix& y) {
  if (x.cols != y.rows) throw Error(ErrKind::Shape, "matmul shape mismatch");
  CMatrix z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int k = 0; k < x.cols; ++k) {
      const cplx v = x.at(i, k);
      if (v == cplx(0.0)) continue;
      for (int j = 0; j < y.cols; ++j) z.at(i, j) += v * y.at(k, j);
    }
  }
  return z;
}

inline CMatrix matAdd(const CMatrix& x, const CMatrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw Error(ErrKind::Shape, "add shape mismatch");
  CMatrix z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] += y.a[i];
  return z;
}

inline CMatrix matSub(const CMatrix& x, const CMatrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw Error(ErrKind::Shape, "sub shape mismatch");
  CMatrix z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
  return z;
}

inline CMatrix matScale(const CMatrix& x, cplx s) {
  CMatrix z = x;
  for (auto& v : z.a) v *= s;
  return z;
}

inline CMatrix kron(const CMatrix& x, const CMatrix& y) {
  CMatrix z(x.rows * y.rows, x.cols * y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) {
      const cplx v = x.at(i, j);
      if (v == cplx(0.0)) continue;
      for (int p = 0; p < y.rows; ++p)
        for (int q = 0; q < y.cols; ++q)
          z.at(i * y.rows + p, j * y.cols + q) = v * y.at(p, q);
    }
  return z;
}

inline double frobeniusNorm(const CMatrix& m) {
  double s = 0.0;
  for (const auto& v : m.a) s += std::norm(v);
  return std::sqrt(s);
}

inline bool allFinite(const CMatrix& m) {
  for (const auto& v : m.a)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

inline bool allFinite(const VecC& v) {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline double maxAbs(const VecC& v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

// Frobenius-style sesquilinear pairing <f, x> = sum conj(f_i) x_i.
inline cplx pairing(const VecC& f, const VecC& x) {
  if (f.size() != x.size()) throw Error(ErrKind::Shape, "pairing length mismatch");
  cplx s = 0.0;
  for (size_t i = 0; i < f.size(); ++i) s += std::conj(f[i]) * x[i];
  return s;
}

inline VecC vecAdd(const VecC& x, const VecC& y) {
  if (x.size() != y.size()) throw Error(ErrKind::Shape, "vector add length mismatch");
  VecC z = x;
  for (size_t i = 0; i < z.size(); ++i) z[i] += y[i];
  return z;
}

inline VecC vecSub(const VecC& x, const VecC& y) {
  if (x.size() != y.size()) throw Error(ErrKind::Shape, "vector sub length mismatch");
  VecC z = x;
  for (size_t i = 0; i < z.size(); ++i) z[i] -= y[i];
  return z;
}

inline VecC vecScale(const VecC& x, cplx s) {
  VecC z = x;
  for (auto& v : z) v *= s;
  return z;
}

inline double vecL2(const VecC& x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return std::sqrt(s);
}

}  // namespace oplab
