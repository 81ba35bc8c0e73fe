#pragma once

// Generative models for the three experiment families, noise/clipping
// calibration, the key-value config format and the error metrics.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctista/errors.hpp"
#include "ctista/nonlinearity.hpp"
#include "ctista/numerics.hpp"
#include "ctista/shrinkage.hpp"

namespace ctista {

enum class ScenarioKind { cs_sparse, psk8_under, clipped_ofdm };
enum class MatrixEnsemble { cn_unit_over_m, cn_unit, idft };
enum class GradientMethod { adjoint, finite_difference };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::cs_sparse: return "cs-sparse";
    case ScenarioKind::psk8_under: return "psk8-under";
    case ScenarioKind::clipped_ofdm: return "clipped-ofdm";
  }
  return "?";
}

inline std::string to_string(MatrixEnsemble e) {
  switch (e) {
    case MatrixEnsemble::cn_unit_over_m: return "cn-unit-over-m";
    case MatrixEnsemble::cn_unit: return "cn-unit";
    case MatrixEnsemble::idft: return "idft";
  }
  return "?";
}

/// Everything needed to regenerate one experiment. Field names match the
/// config-file keys (see configs/README.md).
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::cs_sparse;
  int n = 300;
  int m = 150;
  // sparse source
  double p = 0.1;
  double sigma_x2 = 1.0;
  // discrete source
  std::string constellation = "8psk";
  MatrixEnsemble matrix = MatrixEnsemble::cn_unit_over_m;
  bool clip = false;
  double papr_db = std::numeric_limits<double>::infinity();
  // exactly one of these is used; snr_db wins when both are set
  std::optional<double> noise_var = 0.0004;
  std::optional<double> snr_db;
  // C-TISTA and training
  int T = 12;
  int K = 1000;
  int L = 200;
  double lr = 0.0005;
  bool freeze_earlier = false;
  bool hermitian_step = false;
  bool amp_soft = true;  ///< AMP baseline denoiser: soft threshold (true) or Bayes posterior mean
  bool init_a_zf = true;  ///< a_t starts at the ZF noise variance (true) or at sigma^2
  GradientMethod gradient = GradientMethod::adjoint;
  std::uint64_t seed = 1;
  // evaluation
  int trials = 1000;
  std::vector<double> snr_grid;
  bool train_per_snr = false;
  int ser_min_errors = 100;
  int ser_max_trials = 20000;
  int calibration_blocks = 10000;

  static ScenarioConfig defaults(ScenarioKind kind) {
    ScenarioConfig c;
    c.kind = kind;
    switch (kind) {
      case ScenarioKind::cs_sparse:
        break;
      case ScenarioKind::psk8_under:
        c.n = 200;
        c.m = 160;
        c.constellation = "8psk";
        c.matrix = MatrixEnsemble::cn_unit;
        c.noise_var.reset();
        c.snr_db = 20.0;
        c.T = 10;
        c.K = 500;
        c.snr_grid = {5, 7.5, 10, 12.5, 15, 17.5, 20, 22.5, 25};
        break;
      case ScenarioKind::clipped_ofdm:
        c.n = 128;
        c.m = 128;
        c.constellation = "qam16";
        c.matrix = MatrixEnsemble::idft;
        c.clip = true;
        c.papr_db = 3.0;
        c.noise_var.reset();
        c.snr_db = 17.5;
        c.T = 10;
        c.K = 500;
        c.snr_grid = {5, 7.5, 10, 12.5, 15, 17.5, 20};
        break;
    }
    return c;
  }

  bool discrete_source() const { return kind != ScenarioKind::cs_sparse; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (n < 1 || m < 1) fail("n and m must be positive");
    if (m > n) fail("m must not exceed n");
    if (matrix == MatrixEnsemble::idft && m != n) fail("idft ensemble needs m == n");
    if (kind == ScenarioKind::cs_sparse) {
      if (!(p > 0.0 && p <= 1.0)) fail("p must lie in (0, 1]");
      if (!(sigma_x2 > 0.0)) fail("sigma_x2 must be positive");
    } else {
      parse_constellation(constellation);
    }
    if (clip && !(papr_db == papr_db)) fail("papr_db is NaN");
    if (!snr_db && !noise_var) fail("one of noise_var or snr_db is required");
    if (noise_var && !(*noise_var >= 0.0)) fail("noise_var must be non-negative");
    if (T < 1) fail("T must be at least 1");
    if (K < 0) fail("K must be non-negative");
    if (L < 1) fail("L must be at least 1");
    if (!(lr > 0.0)) fail("lr must be positive");
    if (trials < 1) fail("trials must be positive");
    if (ser_min_errors < 0 || ser_max_trials < 1) fail("SER trial limits out of range");
    if (calibration_blocks < 1) fail("calibration_blocks must be positive");
  }
};

// ---------------------------------------------------------------------------
// Config file: one `key = value` per line, '#' starts a comment.

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = val;
  }
  auto kind_it = kv.find("kind");
  if (kind_it == kv.end()) throw ConfigError("config: missing required key 'kind'");
  ScenarioConfig c;
  if (kind_it->second == "cs-sparse") c = ScenarioConfig::defaults(ScenarioKind::cs_sparse);
  else if (kind_it->second == "psk8-under") c = ScenarioConfig::defaults(ScenarioKind::psk8_under);
  else if (kind_it->second == "clipped-ofdm") c = ScenarioConfig::defaults(ScenarioKind::clipped_ofdm);
  else throw ConfigError("config: unknown kind '" + kind_it->second + "'");
  kv.erase(kind_it);

  for (const auto& [key, v] : kv) {
    using namespace detail;
    if (key == "n") c.n = static_cast<int>(parse_int(key, v));
    else if (key == "m") c.m = static_cast<int>(parse_int(key, v));
    else if (key == "p") c.p = parse_double(key, v);
    else if (key == "sigma_x2") c.sigma_x2 = parse_double(key, v);
    else if (key == "constellation") c.constellation = v;
    else if (key == "matrix") {
      if (v == "cn-unit-over-m") c.matrix = MatrixEnsemble::cn_unit_over_m;
      else if (v == "cn-unit") c.matrix = MatrixEnsemble::cn_unit;
      else if (v == "idft") c.matrix = MatrixEnsemble::idft;
      else throw ConfigError("config: unknown matrix ensemble '" + v + "'");
    } else if (key == "nonlinearity") {
      if (v == "identity") c.clip = false;
      else if (v == "clip") c.clip = true;
      else throw ConfigError("config: unknown nonlinearity '" + v + "'");
    } else if (key == "papr_db") c.papr_db = parse_double(key, v);
    else if (key == "noise_var") {
      c.noise_var = parse_double(key, v);
      if (!kv.count("snr_db")) c.snr_db.reset();
    } else if (key == "snr_db") {
      c.snr_db = parse_double(key, v);
      if (!kv.count("noise_var")) c.noise_var.reset();
    } else if (key == "T") c.T = static_cast<int>(parse_int(key, v));
    else if (key == "K") c.K = static_cast<int>(parse_int(key, v));
    else if (key == "L") c.L = static_cast<int>(parse_int(key, v));
    else if (key == "lr") c.lr = parse_double(key, v);
    else if (key == "freeze_earlier") c.freeze_earlier = parse_bool(key, v);
    else if (key == "step_matrix") {
      if (v == "pinv") c.hermitian_step = false;
      else if (v == "hermitian") c.hermitian_step = true;
      else throw ConfigError("config: step_matrix must be pinv or hermitian");
    } else if (key == "amp_denoiser") {
      if (v == "soft") c.amp_soft = true;
      else if (v == "bayes") c.amp_soft = false;
      else throw ConfigError("config: amp_denoiser must be soft or bayes");
    } else if (key == "init_a") {
      if (v == "zf-noise") c.init_a_zf = true;
      else if (v == "noise") c.init_a_zf = false;
      else throw ConfigError("config: init_a must be zf-noise or noise");
    } else if (key == "gradient") {
      if (v == "adjoint") c.gradient = GradientMethod::adjoint;
      else if (v == "fd") c.gradient = GradientMethod::finite_difference;
      else throw ConfigError("config: gradient must be adjoint or fd");
    } else if (key == "seed") {
      const long long s = parse_int(key, v);
      if (s < 0) throw ConfigError("config: seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "trials") c.trials = static_cast<int>(parse_int(key, v));
    else if (key == "snr_grid") {
      c.snr_grid.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) c.snr_grid.push_back(parse_double(key, item));
      }
    } else if (key == "train_per_snr") c.train_per_snr = parse_bool(key, v);
    else if (key == "ser_min_errors") c.ser_min_errors = static_cast<int>(parse_int(key, v));
    else if (key == "ser_max_trials") c.ser_max_trials = static_cast<int>(parse_int(key, v));
    else if (key == "calibration_blocks") c.calibration_blocks = static_cast<int>(parse_int(key, v));
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

/// A missing or unreadable config file counts as a config error, not an I/O error.
inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
inline std::string to_config_text(const ScenarioConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "kind = " << to_string(c.kind) << "\n";
  os << "n = " << c.n << "\nm = " << c.m << "\n";
  os << "p = " << format_double(c.p) << "\nsigma_x2 = " << format_double(c.sigma_x2) << "\n";
  os << "constellation = " << c.constellation << "\n";
  os << "matrix = " << to_string(c.matrix) << "\n";
  os << "nonlinearity = " << (c.clip ? "clip" : "identity") << "\n";
  os << "papr_db = " << format_double(c.papr_db) << "\n";
  if (c.noise_var) os << "noise_var = " << format_double(*c.noise_var) << "\n";
  if (c.snr_db) os << "snr_db = " << format_double(*c.snr_db) << "\n";
  os << "T = " << c.T << "\nK = " << c.K << "\nL = " << c.L << "\n";
  os << "lr = " << format_double(c.lr) << "\n";
  os << "freeze_earlier = " << (c.freeze_earlier ? "true" : "false") << "\n";
  os << "step_matrix = " << (c.hermitian_step ? "hermitian" : "pinv") << "\n";
  os << "amp_denoiser = " << (c.amp_soft ? "soft" : "bayes") << "\n";
  os << "init_a = " << (c.init_a_zf ? "zf-noise" : "noise") << "\n";
  os << "gradient = " << (c.gradient == GradientMethod::adjoint ? "adjoint" : "fd") << "\n";
  os << "seed = " << c.seed << "\n";
  os << "trials = " << c.trials << "\n";
  os << "snr_grid = ";
  for (std::size_t i = 0; i < c.snr_grid.size(); ++i) os << (i ? "," : "") << format_double(c.snr_grid[i]);
  os << "\n";
  os << "train_per_snr = " << (c.train_per_snr ? "true" : "false") << "\n";
  os << "ser_min_errors = " << c.ser_min_errors << "\nser_max_trials = " << c.ser_max_trials << "\n";
  os << "calibration_blocks = " << c.calibration_blocks << "\n";
  return os.str();
}

/// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
inline std::string config_digest(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_config_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Random stream ids. Training and evaluation live in disjoint ranges.

namespace streams {
inline constexpr std::uint64_t kMatrix = 1;
inline constexpr std::uint64_t kCalibration = 2;
inline constexpr std::uint64_t kTrainBase = 1ULL << 40;
inline constexpr std::uint64_t kEvalBase = 2ULL << 40;
inline constexpr std::uint64_t kEvalEnd = 3ULL << 40;

inline std::uint64_t train(std::uint64_t generation, std::uint64_t minibatch) {
  const std::uint64_t id = kTrainBase + (generation << 24) + minibatch;
  if (generation >= (1ULL << 16) || minibatch >= (1ULL << 24) || id >= kEvalBase) {
    throw DomainError("training stream id out of range");
  }
  return id;
}

inline std::uint64_t eval(std::uint64_t tag, std::uint64_t chunk) {
  const std::uint64_t id = kEvalBase + (tag << 24) + chunk;
  if (tag >= (1ULL << 16) || chunk >= (1ULL << 24) || id >= kEvalEnd) throw DomainError("evaluation stream id out of range");
  return id;
}

inline bool is_train(std::uint64_t id) { return id >= kTrainBase && id < kEvalBase; }
inline bool is_eval(std::uint64_t id) { return id >= kEvalBase && id < kEvalEnd; }
}  // namespace streams

// ---------------------------------------------------------------------------
// Sources and matrices.

inline CVector sample_bg_source(Eigen::Index n, double p, double sigma_x2, RngStream& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("sample_bg_source: p must lie in (0, 1]");
  if (!(sigma_x2 > 0.0)) throw DomainError("sample_bg_source: sigma_x2 must be positive");
  CVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool active = rng.bernoulli(p);
    x(i) = active ? draw_cgaussian(rng, sigma_x2) : cplx(0.0);
  }
  return x;
}

inline CVector sample_const_source(Eigen::Index n, const Constellation& s, RngStream& rng) {
  CVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = s[s.size() == 1 ? 0 : rng.index(s.size())];
  return x;
}

inline double ensemble_entry_variance(MatrixEnsemble kind, Eigen::Index m, Eigen::Index n) {
  switch (kind) {
    case MatrixEnsemble::cn_unit_over_m: return 1.0 / static_cast<double>(m);
    case MatrixEnsemble::cn_unit: return 1.0;
    case MatrixEnsemble::idft: return 1.0 / static_cast<double>(n);
  }
  return 0.0;
}

inline CMatrix sample_matrix(MatrixEnsemble kind, Eigen::Index m, Eigen::Index n, RngStream& rng) {
  if (kind == MatrixEnsemble::idft) {
    if (m != n) throw DimensionError("sample_matrix: idft ensemble must be square");
    return idft_matrix(n);
  }
  const double var = ensemble_entry_variance(kind, m, n);
  CMatrix a(m, n);
  // row-major fill order
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = draw_cgaussian(rng, var);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Clipping and noise calibration.

/// Clipping level for a target PAPR under the per-sample average-power
/// convention: alpha = sqrt(P_avg 10^{papr/10}), P_avg = E|s|^2 over S.
inline double clip_level_from_papr(double papr_db, const Constellation& s, Eigen::Index n) {
  if (n < 1) throw DomainError("clip_level_from_papr: n must be positive");
  if (std::isnan(papr_db)) throw DomainError("clip_level_from_papr: PAPR is NaN");
  if (std::isinf(papr_db) && papr_db > 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(s.average_power() * std::pow(10.0, papr_db / 10.0));
}

/// 10 log10(max_k |x_k|^2 / p_avg)
inline double papr_of(const CVector& time_signal, double p_avg) {
  if (!(p_avg > 0.0)) throw DomainError("papr_of: p_avg must be positive");
  double peak = 0.0;
  for (Eigen::Index k = 0; k < time_signal.size(); ++k) peak = std::max(peak, std::norm(time_signal(k)));
  return 10.0 * std::log10(peak / p_avg);
}

/// Mean source power E|x_i|^2.
inline double source_power(const ScenarioConfig& c) {
  if (c.kind == ScenarioKind::cs_sparse) return c.p * c.sigma_x2;
  return parse_constellation(c.constellation).average_power();
}

/// Per-sample power E|[Ax]_k|^2 of the unclipped output.
inline double output_sample_power(const ScenarioConfig& c) {
  return source_power(c) * ensemble_entry_variance(c.matrix, c.m, c.n) * static_cast<double>(c.n);
}

inline double clip_level(const ScenarioConfig& c) {
  if (!c.clip || (std::isinf(c.papr_db) && c.papr_db > 0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(output_sample_power(c) * std::pow(10.0, c.papr_db / 10.0));
}

inline ComponentwiseMap scenario_map(const ScenarioConfig& c) {
  if (!c.clip) return ComponentwiseMap::identity();
  return ComponentwiseMap::clip(clip_level(c));
}

inline CVector sample_source(const ScenarioConfig& c, const std::optional<Constellation>& s, RngStream& rng) {
  if (c.kind == ScenarioKind::cs_sparse) return sample_bg_source(c.n, c.p, c.sigma_x2, rng);
  return sample_const_source(c.n, *s, rng);
}

/// E||f(Ax)||^2. Analytic for the unclipped i.i.d. ensembles; Monte-Carlo over
/// calibration_blocks draws (calibration stream, held-fixed matrix) when clipping.
inline double expected_output_power(const ScenarioConfig& c, const CMatrix& a) {
  const double linear = static_cast<double>(c.m) * static_cast<double>(c.n) *
                        ensemble_entry_variance(c.matrix, c.m, c.n) * source_power(c);
  if (!c.clip || std::isinf(clip_level(c))) return linear;
  const ComponentwiseMap f = scenario_map(c);
  std::optional<Constellation> s;
  if (c.discrete_source()) s = parse_constellation(c.constellation);
  RngStream rng(c.seed, streams::kCalibration);
  constexpr int kChunk = 256;
  double total = 0.0;
  int done = 0;
  while (done < c.calibration_blocks) {
    const int cols = std::min(kChunk, c.calibration_blocks - done);
    CMatrix x(c.n, cols);
    for (int j = 0; j < cols; ++j) x.col(j) = sample_source(c, s, rng);
    total += f.apply(a * x).squaredNorm();
    done += cols;
  }
  return total / static_cast<double>(c.calibration_blocks);
}

/// sigma^2 = E||f(Ax)||^2 / (m 10^{SNR/10}), or the fixed noise_var.
inline double calibrate_noise(const ScenarioConfig& c, const CMatrix& a) {
  if (!c.snr_db) return *c.noise_var;
  if (std::isinf(*c.snr_db)) return *c.snr_db > 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return expected_output_power(c, a) / (static_cast<double>(c.m) * std::pow(10.0, *c.snr_db / 10.0));
}

/// Convenience overload drawing the experiment matrix from the config seed.
inline double calibrate_noise(const ScenarioConfig& c) {
  RngStream rng(c.seed, streams::kMatrix);
  return calibrate_noise(c, sample_matrix(c.matrix, c.m, c.n, rng));
}

// ---------------------------------------------------------------------------
// Instances.

/// A realised experiment: the fixed matrix, the observation map, the source
/// alphabet and the calibrated noise variance.
struct Scenario {
  ScenarioConfig config;
  CMatrix A;
  ComponentwiseMap f = ComponentwiseMap::identity();
  std::optional<Constellation> constellation;
  double noise_var = 0.0;

  explicit Scenario(const ScenarioConfig& c) : config(c) {
    config.validate();
    RngStream rng(config.seed, streams::kMatrix);
    A = sample_matrix(config.matrix, config.m, config.n, rng);
    f = scenario_map(config);
    if (config.discrete_source()) constellation = parse_constellation(config.constellation);
    noise_var = calibrate_noise(config, A);
  }

  /// Same matrix and source, different SNR (or fixed noise variance).
  Scenario with_snr(double snr_db) const {
    Scenario s = *this;
    s.config.snr_db = snr_db;
    s.noise_var = calibrate_noise(s.config, s.A);
    return s;
  }

  ShrinkageFn shrinkage() const {
    return constellation ? ShrinkageFn::mmse(*constellation) : ShrinkageFn::complex_soft();
  }
};

struct Instance {
  CVector x;
  CVector y;
};

/// Columns of X are the true signals and columns of Y the observations.
struct InstanceBatch {
  CMatrix X;
  CMatrix Y;
  Eigen::Index size() const noexcept { return X.cols(); }
};

inline InstanceBatch generate_batch(const Scenario& s, Eigen::Index count, RngStream& rng) {
  if (count < 1) throw DomainError("generate_batch: batch size must be positive");
  InstanceBatch b;
  b.X.resize(s.config.n, count);
  for (Eigen::Index j = 0; j < count; ++j) b.X.col(j) = sample_source(s.config, s.constellation, rng);
  b.Y = s.f.apply(s.A * b.X);
  if (s.noise_var > 0.0) {
    for (Eigen::Index j = 0; j < count; ++j) {
      for (Eigen::Index i = 0; i < b.Y.rows(); ++i) b.Y(i, j) += draw_cgaussian(rng, s.noise_var);
    }
  }
  return b;
}

inline Instance generate_instance(const Scenario& s, RngStream& rng) {
  InstanceBatch b = generate_batch(s, 1, rng);
  return {b.X.col(0), b.Y.col(0)};
}

// ---------------------------------------------------------------------------
// Metrics.

inline constexpr double kNmseFloorDb = -150.0;

inline double to_db(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(10.0 * std::log10(ratio), kNmseFloorDb);
}

/// Accumulates ||xhat - x||^2 / ||x||^2 over trials; zero-norm truths are skipped.
struct NmseAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long count = 0;
  long long skipped = 0;

  void add(const CVector& xhat, const CVector& x) {
    const double nx = x.squaredNorm();
    if (!(nx > 0.0)) {
      ++skipped;
      return;
    }
    const double r = (xhat - x).squaredNorm() / nx;
    sum += r;
    sum_sq += r * r;
    ++count;
  }
  void merge(const NmseAccumulator& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
    skipped += o.skipped;
  }
  double mean_ratio() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double db() const { return to_db(mean_ratio()); }
  /// Standard error in dB by the delta method.
  double stderr_db() const {
    if (count < 2 || !(sum > 0.0)) return 0.0;
    const double mean = mean_ratio();
    const double var = std::max(0.0, (sum_sq - count * mean * mean) / static_cast<double>(count - 1));
    return 10.0 / std::log(10.0) * std::sqrt(var / static_cast<double>(count)) / mean;
  }
};

/// Per-symbol squared error ||xhat - x||^2 / n averaged over trials.
struct MseAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long count = 0;

  void add(const CVector& xhat, const CVector& x) {
    const double e = (xhat - x).squaredNorm() / static_cast<double>(x.size());
    sum += e;
    sum_sq += e * e;
    ++count;
  }
  void merge(const MseAccumulator& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double stderr_() const {
    if (count < 2) return 0.0;
    const double mu = mean();
    return std::sqrt(std::max(0.0, (sum_sq - count * mu * mu) / static_cast<double>(count - 1)) /
                     static_cast<double>(count));
  }
};

struct SerAccumulator {
  long long errors = 0;
  long long symbols = 0;

  void add(const CVector& xhat, const CVector& x, const Constellation& s) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (s.nearest_index(xhat(i)) != s.nearest_index(x(i))) ++errors;
    }
    symbols += x.size();
  }
  void merge(const SerAccumulator& o) {
    errors += o.errors;
    symbols += o.symbols;
  }
  double rate() const { return symbols ? static_cast<double>(errors) / static_cast<double>(symbols) : 0.0; }
};

/// NMSE in dB of a single trial (floor -150 dB when the error vanishes).
inline double nmse(const CVector& xhat, const CVector& x) {
  NmseAccumulator acc;
  acc.add(xhat, x);
  if (acc.count == 0) throw DomainError("nmse: true signal has zero norm");
  return acc.db();
}

inline double mse(const CVector& xhat, const CVector& x) {
  if (xhat.size() != x.size()) throw DimensionError("mse: length mismatch");
  return (xhat - x).squaredNorm() / static_cast<double>(x.size());
}

inline double ser(const CVector& xhat, const CVector& x, const Constellation& s) {
  if (xhat.size() != x.size()) throw DimensionError("ser: length mismatch");
  SerAccumulator acc;
  acc.add(xhat, x, s);
  return acc.rate();
}

}  // namespace ctista
