#pragma once

// Unrolled C-TISTA recursion. For layer t = 1..T:
//
//   r_t      = s_t + beta_t h(s_t)
//   lambda_t = max(a_t + b_t ||y - f(A s_t)||^2 / Tr(A^H A), lambda_floor)
//   s_{t+1}  = eta(r_t; lambda_t)
//
// with h(s) = W [ (y - f(As))* . df/dz*(As) + (y - f(As)) . df*/dz*(As) ],
// W the pseudo-inverse of A and s_1 = W y. The estimate is s_{T+1}.

#include <string>
#include <utility>
#include <vector>

#include "ctista/errors.hpp"
#include "ctista/nonlinearity.hpp"
#include "ctista/numerics.hpp"
#include "ctista/shrinkage.hpp"

namespace ctista {

inline constexpr double kLambdaFloor = 1e-9;

/// The 3T trainable scalars {beta_t, a_t, b_t}.
struct CtistaParams {
  std::vector<double> beta;
  std::vector<double> a;
  std::vector<double> b;

  CtistaParams() = default;
  CtistaParams(std::vector<double> beta_, std::vector<double> a_, std::vector<double> b_)
      : beta(std::move(beta_)), a(std::move(a_)), b(std::move(b_)) {
    validate();
  }

  static CtistaParams constant(int layers, double beta0, double a0, double b0) {
    const auto n = static_cast<std::size_t>(layers);
    return {std::vector<double>(n, beta0), std::vector<double>(n, a0), std::vector<double>(n, b0)};
  }

  int layers() const noexcept { return static_cast<int>(beta.size()); }

  void validate() const {
    if (beta.size() != a.size() || beta.size() != b.size()) {
      throw DimensionError("CtistaParams: beta, a and b must have equal length");
    }
    for (std::size_t i = 0; i < beta.size(); ++i) {
      if (!std::isfinite(beta[i]) || !std::isfinite(a[i]) || !std::isfinite(b[i])) {
        throw DomainError("CtistaParams: non-finite value in layer " + std::to_string(i + 1));
      }
    }
  }

  /// Flattened as [beta_1..beta_t, a_1..a_t, b_1..b_t] over the first t layers.
  std::vector<double> flatten(int t) const {
    std::vector<double> v;
    v.reserve(3 * static_cast<std::size_t>(t));
    for (const auto* p : {&beta, &a, &b}) v.insert(v.end(), p->begin(), p->begin() + t);
    return v;
  }
  void unflatten(int t, const std::vector<double>& v) {
    if (v.size() != 3 * static_cast<std::size_t>(t)) throw DimensionError("CtistaParams::unflatten: size mismatch");
    auto it = v.begin();
    for (auto* p : {&beta, &a, &b}) {
      std::copy(it, it + t, p->begin());
      it += t;
    }
  }

  bool operator==(const CtistaParams&) const = default;
};

/// Problem context shared by every forward pass: A, its pseudo-inverse, Tr(A^H A),
/// the observation map f, the shrinkage function and the layer count.
class CtistaModel {
 public:
  /// `hermitian_step` swaps W for A^H in the gradient step (initialisation
  /// stays s_1 = W y).
  CtistaModel(CMatrix a, ComponentwiseMap f, ShrinkageFn eta, int layers, bool hermitian_step = false)
      : a_(std::move(a)), f_(std::move(f)), eta_(std::move(eta)), layers_(layers), hermitian_step_(hermitian_step) {
    if (layers_ < 1) throw DomainError("CtistaModel: layer count must be at least 1");
    if (!all_finite(a_)) throw DomainError("CtistaModel: A has non-finite entries");
    w_ = pseudo_inverse(a_);
    trace_gram_ = ctista::trace_gram(a_);
    if (!(trace_gram_ > 0.0)) throw DomainError("CtistaModel: A is zero");
    if (hermitian_step_) step_ = a_.adjoint();
  }

  const CMatrix& A() const noexcept { return a_; }
  const CMatrix& W() const noexcept { return w_; }
  /// Matrix applied in the gradient step (W unless hermitian_step was requested).
  const CMatrix& step_matrix() const noexcept { return hermitian_step_ ? step_ : w_; }
  double trace_gram() const noexcept { return trace_gram_; }
  const ComponentwiseMap& f() const noexcept { return f_; }
  const ShrinkageFn& eta() const noexcept { return eta_; }
  int layers() const noexcept { return layers_; }
  Eigen::Index m() const noexcept { return a_.rows(); }
  Eigen::Index n() const noexcept { return a_.cols(); }

 private:
  CMatrix a_;
  CMatrix w_;
  CMatrix step_;
  double trace_gram_ = 0.0;
  ComponentwiseMap f_;
  ShrinkageFn eta_;
  int layers_;
  bool hermitian_step_;
};

inline void check_shapes(const CtistaModel& model, Eigen::Index s_rows, Eigen::Index y_rows, const char* where) {
  if (s_rows != model.n() || y_rows != model.m()) {
    throw DimensionError(std::string(where) + ": expected |s| = " + std::to_string(model.n()) + " and |y| = " +
                         std::to_string(model.m()) + ", got " + std::to_string(s_rows) + " and " +
                         std::to_string(y_rows));
  }
}

inline CVector h_step(const CtistaModel& model, const CVector& s, const CVector& y) {
  check_shapes(model, s.size(), y.size(), "h_step");
  const CMatrix q = residual_terms(model.f(), model.A() * s, y);
  return model.step_matrix() * q.col(0);
}

/// lambda_t for 1-based layer index t.
inline double lambda_est(const CtistaModel& model, const CtistaParams& params, int t, const CVector& s,
                         const CVector& y) {
  check_shapes(model, s.size(), y.size(), "lambda_est");
  if (t < 1 || t > params.layers()) throw DomainError("lambda_est: layer index out of range");
  const double res = (y - model.f().apply(model.A() * s)).squaredNorm();
  const auto i = static_cast<std::size_t>(t - 1);
  return std::max(params.a[i] + params.b[i] * res / model.trace_gram(), kLambdaFloor);
}

struct TraceStep {
  CVector s;  ///< s_t, the layer input
  CVector r;  ///< r_t after the gradient step
  double lambda = 0.0;
  double residual_sq = 0.0;  ///< ||y - f(A s_t)||^2
};

struct RecoveryTrace {
  std::vector<TraceStep> steps;
};

/// Intermediate values of one layer kept for the training adjoint.
struct LayerCache {
  CMatrix s;  // layer input
  CMatrix u;  // A s
  CMatrix q;  // residual terms
  CMatrix h;  // step_matrix * q
  CMatrix r;
  RVector residual_sq;
  RVector lambda;
  std::vector<bool> clamped;
  ShrinkageDerivatives deta;
};

/// Options for forward_batch. All outputs are optional.
struct ForwardOptions {
  int layers = -1;                         ///< number of layers to run; -1 = model.layers()
  std::vector<LayerCache>* cache = nullptr;  ///< filled for the adjoint
  std::vector<CMatrix>* iterates = nullptr;  ///< s_{t+1} after every layer
  RecoveryTrace* trace = nullptr;          ///< per-layer record of the first column
};

/// Runs the recursion on every column of Y at once. Returns s_{layers+1}.
inline CMatrix forward_batch(const CtistaModel& model, const CtistaParams& params, const CMatrix& y,
                             const ForwardOptions& opt = {}) {
  const int layers = opt.layers < 0 ? model.layers() : opt.layers;
  if (params.layers() < layers || layers > model.layers()) {
    throw DimensionError("ctista_forward: parameters cover " + std::to_string(params.layers()) + " layers, " +
                         std::to_string(layers) + " requested (model has " + std::to_string(model.layers()) + ")");
  }
  if (y.rows() != model.m()) throw DimensionError("ctista_forward: |y| does not match A");
  const Eigen::Index cols = y.cols();
  const auto& f = model.f();
  if (opt.cache) opt.cache->assign(static_cast<std::size_t>(layers), LayerCache{});
  if (opt.iterates) opt.iterates->clear();
  if (opt.trace) opt.trace->steps.clear();

  CMatrix s = model.W() * y;
  CMatrix u, q, h, r, next;
  RVector res(cols), lambda(cols);
  for (int t = 1; t <= layers; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    u.noalias() = model.A() * s;
    q = residual_terms(f, u, y, &res);
    h.noalias() = model.step_matrix() * q;
    r = s + params.beta[i] * h;
    std::vector<bool> clamped(static_cast<std::size_t>(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double raw = params.a[i] + params.b[i] * res(c) / model.trace_gram();
      if (!std::isfinite(raw)) throw DivergenceError("ctista_forward", static_cast<std::size_t>(t));
      clamped[static_cast<std::size_t>(c)] = !(raw > kLambdaFloor);
      lambda(c) = std::max(raw, kLambdaFloor);
    }
    LayerCache* lc = opt.cache ? &(*opt.cache)[i] : nullptr;
    model.eta().apply(r, lambda, next, lc ? &lc->deta : nullptr);
    if (!all_finite(next)) throw DivergenceError("ctista_forward", static_cast<std::size_t>(t));
    if (opt.trace) {
      opt.trace->steps.push_back({s.col(0), r.col(0), lambda(0), res(0)});
    }
    if (lc) {
      lc->s = s;
      lc->u = u;
      lc->q = q;
      lc->h = h;
      lc->r = r;
      lc->residual_sq = res;
      lc->lambda = lambda;
      lc->clamped = std::move(clamped);
    }
    s.swap(next);
    if (opt.iterates) opt.iterates->push_back(s);
  }
  return s;
}

struct RecoveryResult {
  CVector estimate;
  RecoveryTrace trace;
};

inline RecoveryResult ctista_forward(const CtistaModel& model, const CtistaParams& params, const CVector& y) {
  if (params.layers() != model.layers()) {
    throw DimensionError("ctista_forward: parameter length " + std::to_string(params.layers()) +
                         " does not match model T = " + std::to_string(model.layers()));
  }
  RecoveryResult out;
  ForwardOptions opt;
  opt.trace = &out.trace;
  out.estimate = forward_batch(model, params, y, opt).col(0);
  return out;
}

/// Zero-forcing estimate W y.
inline CVector zf_detect(const CMatrix& w, const CVector& y) {
  if (w.cols() != y.size()) throw DimensionError("zf_detect: W has " + std::to_string(w.cols()) +
                                                 " columns but |y| = " + std::to_string(y.size()));
  return w * y;
}

}  // namespace ctista
