#pragma once

// Training of the 3T scalars: mini-batch loss, central-difference and
// reverse-mode (adjoint) gradients, Adam, the layer-by-layer incremental
// schedule and the JSON parameter file.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctista/errors.hpp"
#include "ctista/recovery.hpp"
#include "ctista/scenarios.hpp"

namespace ctista {

/// Mean over the batch of ||s_{t_active+1} - x||^2.
inline double batch_loss(const CtistaModel& model, const CtistaParams& params, const InstanceBatch& batch,
                         int t_active) {
  if (t_active < 1 || t_active > model.layers()) throw DomainError("batch_loss: t_active out of range");
  ForwardOptions opt;
  opt.layers = t_active;
  const CMatrix s = forward_batch(model, params, batch.Y, opt);
  return (s - batch.X).squaredNorm() / static_cast<double>(batch.size());
}

inline constexpr double kFdRelativeStep = 1e-4;

/// Central differences of any scalar loss over a flat parameter vector, with
/// step h_rel * max(1, |theta_i|).
template <class LossFn>
std::vector<double> central_difference(LossFn&& loss, std::vector<double> theta, double h_rel = kFdRelativeStep) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    const double h = h_rel * std::max(1.0, std::abs(orig));
    theta[i] = orig + h;
    const double up = loss(theta);
    theta[i] = orig - h;
    const double down = loss(theta);
    theta[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Finite-difference gradient of batch_loss over the 3 t_active scalars of
/// layers 1..t_active, ordered [beta_1..beta_t, a_1..a_t, b_1..b_t]. Every
/// evaluation reuses the same batch.
inline std::vector<double> grad_fd(const CtistaModel& model, const InstanceBatch& batch, const CtistaParams& params,
                                   int t_active, double h_rel = kFdRelativeStep) {
  if (!(h_rel > 0.0)) throw DomainError("grad_fd: step must be positive");
  CtistaParams work = params;
  auto loss = [&](const std::vector<double>& theta) {
    work.unflatten(t_active, theta);
    return batch_loss(model, work, batch, t_active);
  };
  return central_difference(loss, params.flatten(t_active), h_rel);
}

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  ///< same ordering as grad_fd
};

/// Reverse-mode gradient through the unrolled recursion.
///
/// Complex adjoints follow the convention dLoss = Re sum conj(g_z) dz, so a
/// map v -> u with Wirtinger derivatives (du/dv, du/dv*) propagates
/// g_v = g_u conj(du/dv) + conj(g_u) du/dv*.
inline LossAndGradient grad_adjoint(const CtistaModel& model, const CtistaParams& params, const InstanceBatch& batch,
                                    int t_active) {
  if (t_active < 1 || t_active > model.layers()) throw DomainError("grad_adjoint: t_active out of range");
  std::vector<LayerCache> cache;
  ForwardOptions opt;
  opt.layers = t_active;
  opt.cache = &cache;
  const CMatrix s_out = forward_batch(model, params, batch.Y, opt);
  const double count = static_cast<double>(batch.size());
  const Eigen::Index cols = batch.Y.cols();
  const auto t_sz = static_cast<std::size_t>(t_active);

  LossAndGradient out;
  const CMatrix diff = s_out - batch.X;
  out.loss = diff.squaredNorm() / count;
  out.gradient.assign(3 * t_sz, 0.0);

  const auto& f = model.f();
  const double tr = model.trace_gram();
  CMatrix g_s = (2.0 / count) * diff;
  CMatrix g_r, g_h, g_q, g_u;
  for (int t = t_active; t >= 1; --t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const LayerCache& c = cache[i];

    // s_{t+1} = eta(r_t; lambda_t)
    g_r = g_s.cwiseProduct(c.deta.dr.conjugate()) + g_s.conjugate().cwiseProduct(c.deta.drc);
    RVector g_res = RVector::Zero(cols);
    for (Eigen::Index col = 0; col < cols; ++col) {
      if (c.clamped[static_cast<std::size_t>(col)]) continue;
      double g_lambda = 0.0;
      for (Eigen::Index row = 0; row < g_s.rows(); ++row) {
        g_lambda += (std::conj(g_s(row, col)) * c.deta.dlambda(row, col)).real();
      }
      out.gradient[t_sz + i] += g_lambda;
      out.gradient[2 * t_sz + i] += g_lambda * c.residual_sq(col) / tr;
      g_res(col) = g_lambda * params.b[i] / tr;
    }

    // r_t = s_t + beta_t h
    double g_beta = 0.0;
    for (Eigen::Index k = 0; k < g_r.size(); ++k) g_beta += (std::conj(g_r.data()[k]) * c.h.data()[k]).real();
    out.gradient[i] = g_beta;
    g_h = params.beta[i] * g_r;
    g_q.noalias() = model.step_matrix().adjoint() * g_h;

    // q = q(u, y) and residual ||y - f(u)||^2, whose d/du* is -q
    g_u.resize(c.u.rows(), cols);
    if (f.is_identity()) {
      g_u = -g_q;
    } else {
      for (Eigen::Index col = 0; col < cols; ++col) {
        for (Eigen::Index row = 0; row < c.u.rows(); ++row) {
          const WirtingerJet j = f.jet(c.u(row, col));
          const WirtingerPair dq = residual_term_derivatives(j, batch.Y(row, col));
          const cplx gq = g_q(row, col);
          g_u(row, col) = gq * std::conj(dq.dz) + std::conj(gq) * dq.dzc;
        }
      }
    }
    for (Eigen::Index col = 0; col < cols; ++col) {
      if (g_res(col) != 0.0) g_u.col(col) -= 2.0 * g_res(col) * c.q.col(col);
    }

    // u = A s_t, plus the identity path s_t -> r_t
    g_s = g_r;
    g_s.noalias() += model.A().adjoint() * g_u;
  }
  return out;
}

/// Adam with bias correction.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t count, double learning_rate) : m(count, 0.0), v(count, 0.0), lr(learning_rate) {}
};

inline std::vector<double> adam_step(AdamState& state, std::vector<double> params, const std::vector<double>& grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size()) {
    throw DimensionError("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return params;
}

/// beta_t = 1, b_t = 1 and a_t = sigma^2 (0.01 when the noise variance is unknown).
inline CtistaParams initial_params(int layers, std::optional<double> noise_var) {
  const double a0 = noise_var && *noise_var > 0.0 ? *noise_var : 0.01;
  return CtistaParams::constant(layers, 1.0, a0, 1.0);
}

/// Noise variance per component of the ZF estimate W w relative to sigma^2: Tr(W W^H) / n.
inline double zf_noise_gain(const CtistaModel& model) {
  return model.W().squaredNorm() / static_cast<double>(model.n());
}

/// Initialisation for a scenario: a_t = sigma^2 Tr(W W^H) / n with init_a = zf-noise,
/// a_t = sigma^2 with init_a = noise.
inline CtistaParams initial_params(const Scenario& s, const CtistaModel& model) {
  const double gain = s.config.init_a_zf ? zf_noise_gain(model) : 1.0;
  return initial_params(model.layers(), s.noise_var > 0.0 ? std::optional<double>(s.noise_var * gain) : std::nullopt);
}

struct GenerationRecord {
  int generation = 0;
  int optimized_scalars = 0;
  std::vector<double> losses;  ///< one per minibatch
  double final_loss = 0.0;
  CtistaParams params;  ///< parameters at the end of the generation
};

struct TrainReport {
  std::vector<GenerationRecord> generations;
  CtistaParams params;
  CtistaParams initial;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> streams_used;  ///< first and last stream id per generation
};

struct TrainOptions {
  int K = 500;
  int L = 200;
  double lr = 0.0005;
  bool freeze_earlier = false;
  GradientMethod gradient = GradientMethod::adjoint;

  static TrainOptions from(const ScenarioConfig& c) {
    return {c.K, c.L, c.lr, c.freeze_earlier, c.gradient};
  }
};

/// Layer-by-layer training: generation t optimises layers 1..t (only layer t
/// with freeze_earlier) against the loss after t layers, using K fresh
/// minibatches of size L and a new Adam state.
inline TrainReport incremental_train(const Scenario& scenario, const CtistaModel& model, const TrainOptions& opt,
                                     std::optional<CtistaParams> start = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = scenario.config.seed;
  CtistaParams params = start ? *start : initial_params(scenario, model);
  if (params.layers() != model.layers()) throw DimensionError("incremental_train: parameter length mismatch");
  report.initial = params;

  for (int t = 1; t <= model.layers(); ++t) {
    GenerationRecord rec;
    rec.generation = t;
    const int first = opt.freeze_earlier ? t - 1 : 0;
    const int active = t - first;
    rec.optimized_scalars = 3 * active;
    AdamState adam(3 * static_cast<std::size_t>(active), opt.lr);
    auto pick = [&](const std::vector<double>& full) {
      // full is [beta_1..t, a_1..t, b_1..t]; keep layers first..t-1 (0-based)
      std::vector<double> sub;
      for (int blk = 0; blk < 3; ++blk) {
        for (int l = first; l < t; ++l) sub.push_back(full[static_cast<std::size_t>(blk * t + l)]);
      }
      return sub;
    };
    auto put = [&](std::vector<double>& full, const std::vector<double>& sub) {
      std::size_t k = 0;
      for (int blk = 0; blk < 3; ++blk) {
        for (int l = first; l < t; ++l) full[static_cast<std::size_t>(blk * t + l)] = sub[k++];
      }
    };
    for (int k = 0; k < opt.K; ++k) {
      const std::uint64_t sid = streams::train(static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k));
      if (k == 0 || k == opt.K - 1) report.streams_used.push_back(sid);
      RngStream rng(scenario.config.seed, sid);
      const InstanceBatch batch = generate_batch(scenario, opt.L, rng);
      std::vector<double> grad;
      double loss = 0.0;
      if (opt.gradient == GradientMethod::adjoint) {
        LossAndGradient lg = grad_adjoint(model, params, batch, t);
        loss = lg.loss;
        grad = std::move(lg.gradient);
      } else {
        loss = batch_loss(model, params, batch, t);
        grad = grad_fd(model, batch, params, t);
      }
      std::vector<double> full = params.flatten(t);
      std::vector<double> updated = adam_step(adam, pick(full), pick(grad));
      put(full, updated);
      params.unflatten(t, full);
      rec.losses.push_back(loss);
    }
    rec.final_loss = rec.losses.empty() ? 0.0 : rec.losses.back();
    if (!std::isfinite(rec.final_loss)) throw DivergenceError("incremental_train generation", static_cast<std::size_t>(t));
    params.validate();
    rec.params = params;
    report.generations.push_back(std::move(rec));
  }
  report.params = params;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Parameter file:
// {"version":1, "T":int, "beta":[...], "a":[...], "b":[...], "scenario_digest":hex, "seed":int}

struct ParamFile {
  CtistaParams params;
  std::string scenario_digest;
  std::uint64_t seed = 0;
};

inline nlohmann::json params_to_json(const CtistaParams& p, const std::string& digest, std::uint64_t seed) {
  p.validate();
  nlohmann::json j;
  j["version"] = 1;
  j["T"] = p.layers();
  j["beta"] = p.beta;
  j["a"] = p.a;
  j["b"] = p.b;
  j["scenario_digest"] = digest;
  j["seed"] = seed;
  return j;
}

inline void save_params(const CtistaParams& p, const std::string& path, const std::string& digest = "",
                        std::uint64_t seed = 0) {
  const nlohmann::json j = params_to_json(p, digest, seed);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write parameter file '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline ParamFile params_from_json(const nlohmann::json& j, int expected_layers = -1) {
  auto fail = [](const std::string& msg) { throw ConfigError("parameter file: " + msg); };
  if (!j.is_object()) fail("top level must be an object");
  for (const char* key : {"version", "T", "beta", "a", "b"}) {
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
  }
  if (!j["version"].is_number_integer() || j["version"].get<int>() != 1) fail("unsupported version");
  if (!j["T"].is_number_integer()) fail("'T' must be an integer");
  const int layers = j["T"].get<int>();
  if (layers < 1) fail("'T' must be positive");
  auto read = [&](const char* key) {
    const auto& arr = j[key];
    if (!arr.is_array()) fail(std::string("'") + key + "' must be an array");
    if (static_cast<int>(arr.size()) != layers) fail(std::string("'") + key + "' length differs from T");
    std::vector<double> v;
    for (const auto& e : arr) {
      if (!e.is_number()) fail(std::string("non-numeric entry in '") + key + "'");
      const double d = e.get<double>();
      if (!std::isfinite(d)) fail(std::string("non-finite entry in '") + key + "'");
      v.push_back(d);
    }
    return v;
  };
  ParamFile pf;
  pf.params = CtistaParams(read("beta"), read("a"), read("b"));
  if (j.contains("scenario_digest") && j["scenario_digest"].is_string()) pf.scenario_digest = j["scenario_digest"];
  if (j.contains("seed") && j["seed"].is_number_unsigned()) pf.seed = j["seed"].get<std::uint64_t>();
  if (expected_layers >= 0 && layers != expected_layers) {
    fail("T = " + std::to_string(layers) + " does not match the model's T = " + std::to_string(expected_layers));
  }
  return pf;
}

inline ParamFile load_params(const std::string& path, int expected_layers = -1) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parameter file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("parameter file: ") + e.what());
  }
  return params_from_json(j, expected_layers);
}

}  // namespace ctista
