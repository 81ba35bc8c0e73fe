#pragma once

// Component-wise complex maps carrying their Wirtinger derivatives, a
// finite-difference Wirtinger oracle, the least-squares gradient for
// y = f(Ax) + w, and plain gradient descent on it.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ctista/errors.hpp"
#include "ctista/numerics.hpp"

namespace ctista {

/// Value plus first and second Wirtinger derivatives of a scalar map at one point.
/// dz = df/dz, dzc = df/dz*, dzz = d2f/dz2, dzzc = d2f/dz dz*, dzczc = d2f/dz*2.
struct WirtingerJet {
  cplx value{};
  cplx dz{};
  cplx dzc{};
  cplx dzz{};
  cplx dzzc{};
  cplx dzczc{};
};

/// A point or circle in the plane where a map is not differentiable.
struct NonSmoothLocus {
  enum class Kind { point, circle };
  Kind kind = Kind::point;
  cplx center{};
  double radius = 0.0;

  double distance(cplx z) const {
    const double r = std::abs(z - center);
    return kind == Kind::point ? r : std::abs(r - radius);
  }
};

class ComponentwiseMap {
 public:
  enum class Kind { identity, clip, polynomial, custom };
  using JetFn = std::function<WirtingerJet(cplx)>;

  static ComponentwiseMap identity() { return ComponentwiseMap(Kind::identity, "identity"); }

  /// Amplitude clipping at level alpha: z if |z| <= alpha, else alpha e^{i arg z}.
  /// alpha = +inf is accepted and behaves as the identity.
  static ComponentwiseMap clip(double alpha) {
    if (!(alpha > 0.0)) throw DomainError("clip_map: alpha must be positive");
    ComponentwiseMap f(Kind::clip, "clip");
    f.alpha_ = alpha;
    if (std::isfinite(alpha)) f.loci_.push_back({NonSmoothLocus::Kind::circle, cplx{}, alpha});
    return f;
  }

  /// Analytic polynomial sum_k coeffs[k] z^k.
  static ComponentwiseMap polynomial(std::vector<cplx> coeffs) {
    if (coeffs.empty()) throw DomainError("polynomial map needs at least one coefficient");
    ComponentwiseMap f(Kind::polynomial, "polynomial");
    f.coeffs_ = std::move(coeffs);
    return f;
  }

  /// User-supplied map. The jet function must fill value, dz and dzc; the second
  /// derivatives are only consumed by the training adjoint.
  static ComponentwiseMap custom(std::string name, JetFn jet, std::vector<NonSmoothLocus> loci = {}) {
    ComponentwiseMap f(Kind::custom, std::move(name));
    f.jet_ = std::move(jet);
    f.loci_ = std::move(loci);
    return f;
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double alpha() const noexcept { return alpha_; }
  bool is_identity() const noexcept {
    return kind_ == Kind::identity || (kind_ == Kind::clip && !std::isfinite(alpha_));
  }
  bool smooth_everywhere() const noexcept { return loci_.empty(); }
  const std::vector<NonSmoothLocus>& non_smooth_loci() const noexcept { return loci_; }

  double distance_to_non_smooth(cplx z) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& l : loci_) d = std::min(d, l.distance(z));
    return d;
  }

  WirtingerJet jet(cplx z) const {
    switch (kind_) {
      case Kind::identity:
        return {z, 1.0, 0.0, 0.0, 0.0, 0.0};
      case Kind::clip: {
        const double rho = std::abs(z);
        // |z| == alpha takes the interior branch
        if (rho <= alpha_) return {z, 1.0, 0.0, 0.0, 0.0, 0.0};
        const cplx zc = std::conj(z);
        WirtingerJet j;
        j.value = alpha_ * z / rho;
        j.dz = alpha_ / (2.0 * rho);
        j.dzc = -alpha_ * z * z / (2.0 * rho * rho * rho);
        j.dzz = -alpha_ / (4.0 * z * rho);
        j.dzzc = -alpha_ / (4.0 * zc * rho);
        j.dzczc = 3.0 * alpha_ * z / (4.0 * zc * zc * rho);
        return j;
      }
      case Kind::polynomial: {
        // Horner for value, first and second derivative together
        cplx p = 0.0, dp = 0.0, ddp = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
          ddp = ddp * z + 2.0 * dp;
          dp = dp * z + p;
          p = p * z + *it;
        }
        return {p, dp, 0.0, ddp, 0.0, 0.0};
      }
      case Kind::custom:
        return jet_(z);
    }
    return {};
  }

  cplx eval(cplx z) const {
    if (kind_ == Kind::clip) {
      const double rho = std::abs(z);
      return rho <= alpha_ ? z : alpha_ * z / rho;
    }
    if (kind_ == Kind::identity) return z;
    return jet(z).value;
  }

  /// df/dz*
  cplx d_f_dzc(cplx z) const { return jet(z).dzc; }
  /// df*/dz*, which equals conj(df/dz)
  cplx d_fconj_dzc(cplx z) const { return std::conj(jet(z).dz); }

  CMatrix apply(const CMatrix& u) const {
    if (is_identity()) return u;
    CMatrix out(u.rows(), u.cols());
    for (Eigen::Index k = 0; k < u.size(); ++k) out.data()[k] = eval(u.data()[k]);
    return out;
  }

 private:
  ComponentwiseMap(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  double alpha_ = std::numeric_limits<double>::infinity();
  std::vector<cplx> coeffs_;
  JetFn jet_;
  std::vector<NonSmoothLocus> loci_;
};

inline ComponentwiseMap clip_map(double alpha) { return ComponentwiseMap::clip(alpha); }

struct WirtingerPair {
  cplx dz;   ///< df/dz
  cplx dzc;  ///< df/dz*
};

inline double default_fd_step(cplx z) { return 1e-5 * std::max(1.0, std::abs(z)); }

/// Central-difference Wirtinger derivatives of any scalar function
/// F(z_r, z_i) = f(z): df/dz = (F_r - i F_i)/2, df/dz* = (F_r + i F_i)/2.
template <class Fn>
WirtingerPair wirtinger_fd_fn(Fn&& f, cplx z, double h) {
  if (!(h > 0.0)) throw DomainError("wirtinger_fd: step must be positive");
  const cplx fr = (f(z + cplx(h, 0.0)) - f(z - cplx(h, 0.0))) / (2.0 * h);
  const cplx fi = (f(z + cplx(0.0, h)) - f(z - cplx(0.0, h))) / (2.0 * h);
  return {0.5 * (fr - kI * fi), 0.5 * (fr + kI * fi)};
}

/// Finite-difference oracle for a ComponentwiseMap. Refuses points within 2h
/// of a declared non-smooth locus.
inline WirtingerPair wirtinger_fd(const ComponentwiseMap& f, cplx z, double h) {
  if (!(h > 0.0)) throw DomainError("wirtinger_fd: step must be positive");
  if (f.distance_to_non_smooth(z) <= 2.0 * h) {
    throw DomainError("wirtinger_fd: point lies within 2h of a non-smooth locus of " + f.name());
  }
  return wirtinger_fd_fn([&f](cplx w) { return f.eval(w); }, z, h);
}

inline WirtingerPair wirtinger_fd(const ComponentwiseMap& f, cplx z) {
  return wirtinger_fd(f, z, default_fd_step(z));
}

/// Per-component term of the LMS gradient,
/// q = (y - f(u))* df/dz*(u) + (y - f(u)) df*/dz*(u),
/// which equals -d|y - f(u)|^2 / du*.
inline cplx residual_term(const WirtingerJet& j, cplx y) {
  const cplx e = y - j.value;
  return std::conj(e) * j.dzc + e * std::conj(j.dz);
}

/// Wirtinger derivatives (dq/du, dq/du*) of residual_term with y fixed.
inline WirtingerPair residual_term_derivatives(const WirtingerJet& j, cplx y) {
  const cplx e = y - j.value;
  const cplx ec = std::conj(e);
  const cplx dq_du = -std::conj(j.dzc) * j.dzc + ec * j.dzzc - j.dz * std::conj(j.dz) + e * std::conj(j.dzzc);
  const cplx dq_duc = -std::conj(j.dz) * j.dzc + ec * j.dzczc - j.dzc * std::conj(j.dz) + e * std::conj(j.dzz);
  return {dq_du, dq_duc};
}

/// Column-wise residual terms Q = q(U, Y) and, optionally, ||y - f(u)||^2 per column.
inline CMatrix residual_terms(const ComponentwiseMap& f, const CMatrix& u, const CMatrix& y,
                              Eigen::VectorXd* residual_sq = nullptr) {
  if (u.rows() != y.rows() || u.cols() != y.cols()) throw DimensionError("residual_terms: shape mismatch");
  CMatrix q(u.rows(), u.cols());
  if (residual_sq) residual_sq->setZero(u.cols());
  if (f.is_identity()) {
    q = y - u;
    if (residual_sq) *residual_sq = q.colwise().squaredNorm().transpose();
    return q;
  }
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const WirtingerJet j = f.jet(u(r, c));
      q(r, c) = residual_term(j, y(r, c));
      acc += std::norm(y(r, c) - j.value);
    }
    if (residual_sq) (*residual_sq)(c) = acc;
  }
  return q;
}

/// g(x) = ||y - f(Ax)||^2
inline double lms_objective(const CMatrix& a, const CVector& y, const ComponentwiseMap& f, const CVector& x) {
  return (y - f.apply(a * x)).squaredNorm();
}

/// Steepest-descent gradient -dg/dx* of g(x) = ||y - f(Ax)||^2:
/// -1/2 A^H [ (y - f(Ax))* . df/dz*(Ax) + (y - f(Ax)) . df*/dz*(Ax) ].
inline CVector grad_lms(const CMatrix& a, const CVector& y, const ComponentwiseMap& f, const CVector& x) {
  if (a.rows() != y.size() || a.cols() != x.size()) {
    throw DimensionError("grad_lms: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         ", |y| = " + std::to_string(y.size()) + ", |x| = " + std::to_string(x.size()));
  }
  const CMatrix u = a * x;
  const CMatrix q = residual_terms(f, u, y);
  return -0.5 * (a.adjoint() * q.col(0));
}

/// Closed form for the linear model f(z) = z: -1/2 A^H (y - Ax).
inline CVector grad_lms_linear(const CMatrix& a, const CVector& y, const CVector& x) {
  return -0.5 * (a.adjoint() * (y - a * x));
}

/// Iterates x <- x - 2 beta grad_lms(x), `iterations` times.
inline CVector gradient_descent(const CMatrix& a, const CVector& y, const ComponentwiseMap& f, double beta,
                                int iterations, const CVector& x0) {
  if (!(beta > 0.0)) throw DomainError("gradient_descent: beta must be positive");
  if (iterations < 0) throw DomainError("gradient_descent: iteration count must be non-negative");
  CVector x = x0;
  for (int t = 1; t <= iterations; ++t) {
    x -= 2.0 * beta * grad_lms(a, y, f, x);
    if (!all_finite(x)) throw DivergenceError("gradient_descent", static_cast<std::size_t>(t));
  }
  return x;
}

}  // namespace ctista
