#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctista/errors.hpp"
#include "ctista/numerics.hpp"

namespace ctista {

/// Finite complex signal set with its cached average power.
class Constellation {
 public:
  Constellation(std::vector<cplx> points, std::string name) : points_(std::move(points)), name_(std::move(name)) {
    if (points_.empty()) throw DomainError("constellation '" + name_ + "' is empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (std::size_t j = i + 1; j < points_.size(); ++j) {
        if (points_[i] == points_[j]) throw DomainError("constellation '" + name_ + "' has repeated points");
      }
    }
    double p = 0.0, peak = 0.0;
    cplx mean = 0.0;
    for (const auto& s : points_) {
      p += std::norm(s);
      peak = std::max(peak, std::abs(s));
      mean += s;
    }
    avg_power_ = p / static_cast<double>(points_.size());
    max_abs_ = peak;
    mean_ = mean / static_cast<double>(points_.size());
  }

  const std::vector<cplx>& points() const noexcept { return points_; }
  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return points_.size(); }
  const cplx& operator[](std::size_t i) const { return points_[i]; }
  double average_power() const noexcept { return avg_power_; }
  double max_abs() const noexcept { return max_abs_; }
  cplx mean() const noexcept { return mean_; }

  /// Index of the nearest point; ties go to the lowest index.
  std::size_t nearest_index(cplx y) const {
    std::size_t best = 0;
    double best_d = std::norm(y - points_[0]);
    for (std::size_t k = 1; k < points_.size(); ++k) {
      const double d = std::norm(y - points_[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

 private:
  std::vector<cplx> points_;
  std::string name_;
  double avg_power_ = 0.0;
  double max_abs_ = 0.0;
  cplx mean_{};
};

/// M-PSK points exp(i 2 pi k / M), k = 0..M-1. For M = 8 these are exp(i k pi/4).
inline Constellation make_psk(int m) {
  if (m < 2) throw DomainError("make_psk: M must be at least 2");
  std::vector<cplx> pts;
  pts.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    // exact values on the axes keep 4-PSK symmetric
    if (4 * k % m == 0) {
      static constexpr cplx axis[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      pts.push_back(axis[(4 * k / m) % 4]);
    } else {
      pts.push_back(std::polar(1.0, 2.0 * std::numbers::pi * k / m));
    }
  }
  return Constellation(std::move(pts), m == 8 ? "8psk" : "mpsk:" + std::to_string(m));
}

/// Unnormalised 16-QAM {p + iq : p, q in {-3,-1,1,3}}, average power 10.
inline Constellation make_qam16() {
  std::vector<cplx> pts;
  for (int p : {-3, -1, 1, 3}) {
    for (int q : {-3, -1, 1, 3}) pts.emplace_back(p, q);
  }
  return Constellation(std::move(pts), "qam16");
}

/// Accepts "8psk", "qam16" and "mpsk:<M>".
inline Constellation parse_constellation(const std::string& name) {
  if (name == "8psk") return make_psk(8);
  if (name == "qam16") return make_qam16();
  if (name.rfind("mpsk:", 0) == 0) {
    try {
      std::size_t used = 0;
      const int m = std::stoi(name.substr(5), &used);
      if (used == name.size() - 5) return make_psk(m);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown constellation '" + name + "'");
}

inline double soft_real(double x, double lambda) {
  const double mag = std::max(std::abs(x) - lambda, 0.0);
  return x > 0.0 ? mag : (x < 0.0 ? -mag : 0.0);
}

/// Shrinks |x| by lambda, keeping the phase.
inline cplx soft_complex(cplx x, double lambda) {
  const double r = std::abs(x);
  if (r == 0.0) return 0.0;
  const double mag = soft_real(r, lambda);
  return mag == 0.0 ? cplx(0.0) : x * (mag / r);
}

inline cplx hard_decision(cplx y, const Constellation& s) { return s[s.nearest_index(y)]; }

/// Posterior mean E[x | y] for a uniform prior over S observed through a
/// complex AWGN channel of variance lambda. lambda = 0 returns the nearest point.
inline cplx mmse_shrink(cplx y, double lambda, const Constellation& s) {
  if (!(lambda > 0.0)) return hard_decision(y, s);
  double dmin = std::norm(y - s[0]);
  for (std::size_t k = 1; k < s.size(); ++k) dmin = std::min(dmin, std::norm(y - s[k]));
  cplx num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double w = std::exp(-(std::norm(y - s[k]) - dmin) / lambda);
    num += w * s[k];
    den += w;
  }
  return num / den;
}

/// Element-wise derivatives of a shrinkage output with respect to its input r
/// (Wirtinger d/dr, d/dr*) and to the real variance parameter lambda.
struct ShrinkageDerivatives {
  CMatrix dr;
  CMatrix drc;
  CMatrix dlambda;
};

/// Projection step eta(r; lambda): complex soft thresholding or constellation MMSE.
class ShrinkageFn {
 public:
  enum class Kind { complex_soft, mmse };

  static ShrinkageFn complex_soft() { return ShrinkageFn(Kind::complex_soft, std::nullopt); }
  static ShrinkageFn mmse(Constellation s) { return ShrinkageFn(Kind::mmse, std::move(s)); }

  Kind kind() const noexcept { return kind_; }
  const Constellation& constellation() const {
    if (!constellation_) throw DomainError("soft shrinkage has no constellation");
    return *constellation_;
  }

  cplx operator()(cplx r, double lambda) const {
    return kind_ == Kind::complex_soft ? soft_complex(r, lambda) : mmse_shrink(r, lambda, *constellation_);
  }

  /// Applies eta column by column with lambda(c) for column c. When `d` is
  /// non-null the element-wise derivatives are written there too.
  void apply(const CMatrix& r, const RVector& lambda, CMatrix& out, ShrinkageDerivatives* d = nullptr) const {
    if (lambda.size() != r.cols()) throw DimensionError("ShrinkageFn::apply: one lambda per column expected");
    out.resize(r.rows(), r.cols());
    if (d) {
      d->dr.resize(r.rows(), r.cols());
      d->drc.resize(r.rows(), r.cols());
      d->dlambda.resize(r.rows(), r.cols());
    }
    if (kind_ == Kind::complex_soft) {
      apply_soft(r, lambda, out, d);
    } else {
      apply_mmse(r, lambda, out, d);
    }
  }

 private:
  ShrinkageFn(Kind kind, std::optional<Constellation> s) : kind_(kind), constellation_(std::move(s)) {}

  static void apply_soft(const CMatrix& r, const RVector& lambda, CMatrix& out, ShrinkageDerivatives* d) {
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
      const double lam = lambda(c);
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const cplx z = r(i, c);
        const double rho = std::abs(z);
        if (rho > lam && rho > 0.0) {
          const cplx unit = z / rho;
          out(i, c) = z * ((rho - lam) / rho);
          if (d) {
            d->dr(i, c) = 1.0 - lam / (2.0 * rho);
            d->drc(i, c) = lam * unit * unit / (2.0 * rho);
            d->dlambda(i, c) = -unit;
          }
        } else {
          out(i, c) = 0.0;
          if (d) d->dr(i, c) = d->drc(i, c) = d->dlambda(i, c) = 0.0;
        }
      }
    }
  }

  void apply_mmse(const CMatrix& r, const RVector& lambda, CMatrix& out, ShrinkageDerivatives* d) const {
    const auto& pts = constellation_->points();
    const std::size_t m = pts.size();
    std::vector<double> dist(m);
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
      const double lam = lambda(c);
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const cplx z = r(i, c);
        if (!(lam > 0.0)) {
          out(i, c) = hard_decision(z, *constellation_);
          if (d) d->dr(i, c) = d->drc(i, c) = d->dlambda(i, c) = 0.0;
          continue;
        }
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
          dist[k] = std::norm(z - pts[k]);
          dmin = std::min(dmin, dist[k]);
        }
        double den = 0.0, e_abs2 = 0.0;
        cplx e_s = 0.0, e_s2 = 0.0, e_sd = 0.0;
        double e_d = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double w = std::exp(-(dist[k] - dmin) / lam);
          den += w;
          e_s += w * pts[k];
          if (d) {
            e_s2 += w * pts[k] * pts[k];
            e_abs2 += w * std::norm(pts[k]);
            e_sd += w * dist[k] * pts[k];
            e_d += w * dist[k];
          }
        }
        const cplx mean = e_s / den;
        out(i, c) = mean;
        if (d) {
          // d/dr* log w_s = (s - r)/lam, d/dr log w_s = (s - r)*/lam,
          // d/dlam log w_s = |r - s|^2 / lam^2
          d->drc(i, c) = (e_s2 / den - mean * mean) / lam;
          d->dr(i, c) = (e_abs2 / den - std::norm(mean)) / lam;
          d->dlambda(i, c) = (e_sd / den - mean * (e_d / den)) / (lam * lam);
        }
      }
    }
  }

  Kind kind_;
  std::optional<Constellation> constellation_;
};

}  // namespace ctista
