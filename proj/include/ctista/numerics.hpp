#pragma once

// Complex linear-algebra primitives shared by the recovery code: Hermitian
// transpose, Moore-Penrose pseudo-inverse, the unitary inverse-DFT matrix,
// the complex-to-real widening transform and seeded random streams.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <utility>

#include "ctista/errors.hpp"

namespace ctista {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr cplx kI{0.0, 1.0};

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const auto v = m(i, j);
      if constexpr (std::is_same_v<typename Derived::Scalar, cplx>) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
      } else {
        if (!std::isfinite(v)) return false;
      }
    }
  }
  return true;
}

inline CMatrix hermitian_transpose(const CMatrix& a) { return a.adjoint(); }

/// Sum of |a_ij|^2, i.e. Tr(A^H A).
inline double trace_gram(const CMatrix& a) { return a.squaredNorm(); }

namespace detail {

// In-place lower Cholesky of a Hermitian matrix. Returns false when a pivot
// drops below `rel_tol` times the largest diagonal entry.
inline bool cholesky_lower(CMatrix& g, double rel_tol) {
  const Eigen::Index n = g.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, g(i, i).real());
  if (!(scale > 0.0)) return false;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = g(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(g(j, k));
    if (!(d > rel_tol * scale)) return false;
    const double ljj = std::sqrt(d);
    g(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      cplx s = g(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= g(i, k) * std::conj(g(j, k));
      g(i, j) = s / ljj;
    }
  }
  g.triangularView<Eigen::StrictlyUpper>().setZero();
  return true;
}

// Solves (L L^H) X = B for X given the lower factor L.
inline CMatrix cholesky_solve(const CMatrix& l, const CMatrix& b) {
  CMatrix z = l.triangularView<Eigen::Lower>().solve(b);
  return l.adjoint().triangularView<Eigen::Upper>().solve(z);
}

inline CMatrix svd_pseudo_inverse(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;
  if (sv.size() == 0 || sv(sv.size() - 1) <= tol) {
    throw RankError("pseudo_inverse: matrix is rank deficient (smallest singular value " +
                    std::to_string(sv.size() ? sv(sv.size() - 1) : 0.0) + ")");
  }
  RVector inv = sv.cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace detail

inline constexpr double kCholeskyPivotTol = 1e-12;

/// Moore-Penrose pseudo-inverse of a full-rank matrix.
///
/// Fat matrices (m <= n) use A^H (A A^H)^{-1}, tall ones (A^H A)^{-1} A^H, both
/// through a Cholesky factorisation of the Gram matrix. A pivot below
/// 1e-12 relative falls back to an SVD, which throws RankError when the
/// matrix really is rank deficient.
inline CMatrix pseudo_inverse(const CMatrix& a) {
  if (a.size() == 0) throw DimensionError("pseudo_inverse: empty matrix");
  const bool fat = a.rows() <= a.cols();
  CMatrix gram = fat ? CMatrix(a * a.adjoint()) : CMatrix(a.adjoint() * a);
  if (detail::cholesky_lower(gram, kCholeskyPivotTol)) {
    if (fat) {
      // W = A^H G^{-1}  <=>  W^H = G^{-1} A
      return detail::cholesky_solve(gram, a).adjoint();
    }
    return detail::cholesky_solve(gram, a.adjoint());
  }
  return detail::svd_pseudo_inverse(a);
}

/// n x n inverse DFT matrix with entries exp(i 2 pi k j / n) / sqrt(n),
/// k and j counted from zero. The result is unitary.
inline CMatrix idft_matrix(Eigen::Index n) {
  if (n < 1) throw DomainError("idft_matrix: n must be positive");
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // reduce k*j mod n first so the phase stays accurate for large n
      const auto idx = (k * j) % n;
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(idx) / static_cast<double>(n);
      f(k, j) = scale * cplx(std::cos(phase), std::sin(phase));
    }
  }
  return f;
}

/// [[Re A, -Im A], [Im A, Re A]]
inline RMatrix widen_matrix(const CMatrix& a) {
  const Eigen::Index m = a.rows(), n = a.cols();
  RMatrix w(2 * m, 2 * n);
  w.topLeftCorner(m, n) = a.real();
  w.topRightCorner(m, n) = -a.imag();
  w.bottomLeftCorner(m, n) = a.imag();
  w.bottomRightCorner(m, n) = a.real();
  return w;
}

/// [Re v; Im v]
inline RVector widen_vector(const CVector& v) {
  RVector w(2 * v.size());
  w.head(v.size()) = v.real();
  w.tail(v.size()) = v.imag();
  return w;
}

/// Inverse of widen_vector.
inline CVector narrow_vector(const RVector& w) {
  if (w.size() % 2 != 0) throw DimensionError("narrow_vector: odd length");
  const Eigen::Index n = w.size() / 2;
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(w(i), w(n + i));
  return v;
}

inline std::pair<RMatrix, RVector> widen(const CMatrix& a, const CVector& v) {
  if (a.rows() != v.size()) throw DimensionError("widen: A has " + std::to_string(a.rows()) +
                                                 " rows but v has length " + std::to_string(v.size()));
  return {widen_matrix(a), widen_vector(v)};
}

/// Deterministic random stream identified by (seed, stream id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(mix(seed, stream_id)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::size_t index(std::size_t count) {
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return splitmix(splitmix(seed) ^ splitmix(stream + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// One CN(0, var) draw: real and imaginary parts each N(0, var/2).
inline cplx draw_cgaussian(RngStream& rng, double var) {
  const double sd = std::sqrt(var / 2.0);
  const double re = rng.normal();
  const double im = rng.normal();
  return {sd * re, sd * im};
}

inline CVector sample_cgaussian(cplx mean, double var, RngStream& rng, Eigen::Index count) {
  if (!(var >= 0.0)) throw DomainError("sample_cgaussian: variance must be non-negative");
  CVector v(count);
  for (Eigen::Index i = 0; i < count; ++i) v(i) = mean + draw_cgaussian(rng, var);
  return v;
}

}  // namespace ctista
