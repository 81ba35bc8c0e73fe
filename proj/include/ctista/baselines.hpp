#pragma once

// Reference detectors: real-valued AMP (run on the widened real system) and
// the plain DFT receiver for OFDM blocks.

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "ctista/errors.hpp"
#include "ctista/numerics.hpp"
#include "ctista/shrinkage.hpp"

namespace ctista {

struct DenoiserOutput {
  double value;
  double derivative;
};

enum class AmpDenoiser { bayes, soft };

/// Real Bernoulli-Gaussian prior (1-p) delta(x) + p N(0, var) and the noise variance
/// per real component. The soft denoiser thresholds at alpha * tau with alpha the
/// minimax threshold for sparsity p unless `soft_alpha` is set.
struct AmpConfig {
  int iterations = 12;
  double p = 0.1;
  double var = 0.5;
  double noise_var = 0.0;
  AmpDenoiser denoiser = AmpDenoiser::bayes;
  std::optional<double> soft_alpha;

  void validate() const {
    if (iterations < 0) throw DomainError("AmpConfig: iterations must be non-negative");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("AmpConfig: p must lie in (0, 1]");
    if (!(var >= 0.0) || !(noise_var >= 0.0)) throw DomainError("AmpConfig: variances must be non-negative");
    if (soft_alpha && !(*soft_alpha >= 0.0)) throw DomainError("AmpConfig: soft_alpha must be non-negative");
  }
};

/// Worst-case soft-thresholding risk over eps-sparse signals at unit noise,
///   eps (1 + a^2) + (1 - eps) 2 [(1 + a^2) Phi(-a) - a phi(a)].
inline double soft_threshold_minimax_risk(double eps, double alpha) {
  const double phi = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * M_PI);
  const double tail = 0.5 * std::erfc(alpha / std::sqrt(2.0));
  return eps * (1.0 + alpha * alpha) + (1.0 - eps) * 2.0 * ((1.0 + alpha * alpha) * tail - alpha * phi);
}

/// Threshold multiplier minimising soft_threshold_minimax_risk (golden-section search).
inline double minimax_soft_alpha(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) return 0.0;
  double lo = 0.0;
  double hi = 6.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = soft_threshold_minimax_risk(eps, x1);
  double f2 = soft_threshold_minimax_risk(eps, x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = soft_threshold_minimax_risk(eps, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = soft_threshold_minimax_risk(eps, x2);
    }
  }
  return 0.5 * (lo + hi);
}

/// Soft threshold at alpha * tau and its derivative.
inline DenoiserOutput soft_threshold_denoiser(double r, double alpha, double tau2) {
  const double theta = alpha * std::sqrt(tau2);
  if (std::abs(r) <= theta) return {0.0, 0.0};
  return {r > 0.0 ? r - theta : r + theta, 1.0};
}

/// Posterior mean of x ~ (1-p) delta + p N(0, var) from r = x + N(0, tau2), and its
/// derivative in r.
inline DenoiserOutput bg_posterior_mean(double r, double p, double var, double tau2) {
  if (var <= 0.0) return {0.0, 0.0};
  const double s = var + tau2;
  const double gain = var / s;
  const double c = 1.0 / tau2 - 1.0 / s;
  double pi = 1.0;
  if (p < 1.0) {
    // log of (1-p) N(r;0,tau2) / (p N(r;0,s))
    const double log_odds = std::log((1.0 - p) / p) + 0.5 * std::log(s / tau2) - 0.5 * r * r * c;
    pi = log_odds > 700.0 ? 0.0 : 1.0 / (1.0 + std::exp(log_odds));
  }
  const double dpi = pi * (1.0 - pi) * r * c;
  return {pi * gain * r, gain * (pi + r * dpi)};
}

struct AmpResult {
  RVector estimate;
  std::vector<double> tau2;        ///< effective noise variance seen by each denoising step
  std::vector<RVector> iterates;   ///< estimate after each iteration
};

/// AMP with an arbitrary separable denoiser `eta(r, tau2) -> DenoiserOutput`:
///   r = x + A^T z,  x <- eta(r; tau2),
///   z <- y - A x + (n/m) z <eta'>,   tau2 = ||z||^2 / m.
/// Columns of A are assumed to have unit norm on average.
template <class Denoiser>
AmpResult amp_iterate(const RMatrix& a, const RVector& y, int iterations, Denoiser&& eta, double tau2_floor = 1e-30) {
  if (a.rows() != y.size()) throw DimensionError("amp: A and y disagree");
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(a.cols());
  AmpResult out;
  RVector x = RVector::Zero(a.cols());
  RVector z = y;
  RVector r(a.cols());
  for (int t = 1; t <= iterations; ++t) {
    const double tau2 = std::max(z.squaredNorm() / m, tau2_floor);
    r.noalias() = x + a.transpose() * z;
    double deriv_sum = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const DenoiserOutput d = eta(r(i), tau2);
      x(i) = d.value;
      deriv_sum += d.derivative;
    }
    const double onsager = (n / m) * (deriv_sum / n);
    RVector z_next = y - a * x + onsager * z;
    z.swap(z_next);
    if (!all_finite(x) || !all_finite(z)) throw DivergenceError("amp", static_cast<std::size_t>(t));
    out.tau2.push_back(tau2);
    out.iterates.push_back(x);
  }
  out.estimate = x;
  return out;
}

/// Real-valued AMP with the Bayes-optimal Bernoulli-Gaussian denoiser or the
/// soft-threshold denoiser. A is rescaled internally to unit average column norm.
inline AmpResult amp_real(const RMatrix& a, const RVector& y, const AmpConfig& cfg) {
  cfg.validate();
  if (a.rows() > a.cols()) throw DimensionError("amp_real: expects m <= n");
  const double scale = std::sqrt(a.squaredNorm() / static_cast<double>(a.cols()));
  if (!(scale > 0.0)) throw DomainError("amp_real: A is zero");
  const RMatrix as = a / scale;
  // x' = scale * x has prior variance scale^2 var
  const double var = cfg.var * scale * scale;
  const double floor = std::max(cfg.noise_var, 1e-30);
  AmpResult res;
  if (cfg.denoiser == AmpDenoiser::bayes) {
    res = amp_iterate(
        as, y, cfg.iterations, [&](double r, double tau2) { return bg_posterior_mean(r, cfg.p, var, tau2); }, floor);
  } else {
    const double alpha = cfg.soft_alpha ? *cfg.soft_alpha : minimax_soft_alpha(cfg.p);
    res = amp_iterate(
        as, y, cfg.iterations, [&](double r, double tau2) { return soft_threshold_denoiser(r, alpha, tau2); }, floor);
  }
  res.estimate /= scale;
  for (auto& it : res.iterates) it /= scale;
  return res;
}

/// Complex counterpart: widens (A, y), runs amp_real with the per-real-component
/// variances (cfg.var and cfg.noise_var are the complex ones, halved here) and
/// reassembles the complex estimate.
struct WidenedAmpResult {
  CVector estimate;
  std::vector<CVector> iterates;
  std::vector<double> tau2;
};

inline WidenedAmpResult widened_amp_recover(const CMatrix& a, const CVector& y, const AmpConfig& complex_cfg) {
  auto [ar, yr] = widen(a, y);
  AmpConfig cfg = complex_cfg;
  cfg.var = complex_cfg.var / 2.0;
  cfg.noise_var = complex_cfg.noise_var / 2.0;
  AmpResult res = amp_real(ar, yr, cfg);
  WidenedAmpResult out;
  out.estimate = narrow_vector(res.estimate);
  out.tau2 = std::move(res.tau2);
  out.iterates.reserve(res.iterates.size());
  for (const auto& it : res.iterates) out.iterates.push_back(narrow_vector(it));
  return out;
}

struct DftReceiverOutput {
  CVector soft;
  CVector hard;
};

/// Forward DFT of the received time-domain block (F^H y with F the unitary
/// inverse-DFT matrix), followed by nearest-point decisions.
inline DftReceiverOutput dft_receiver(const CVector& y, Eigen::Index n, const Constellation& s) {
  if (y.size() != n) throw DimensionError("dft_receiver: block length mismatch");
  DftReceiverOutput out;
  out.soft = idft_matrix(n).adjoint() * y;
  out.hard.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.hard(i) = hard_decision(out.soft(i), s);
  return out;
}

/// Same as dft_receiver with a precomputed F, for batch evaluation.
inline CMatrix dft_soft(const CMatrix& f, const CMatrix& y) { return f.adjoint() * y; }

}  // namespace ctista
