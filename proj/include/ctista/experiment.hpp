#pragma once

// Monte-Carlo evaluation harness behind the command-line tool: trial fan-out
// over a worker pool, iteration and SNR sweeps, scatter dumps and CSV output.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <exception>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctista/baselines.hpp"
#include "ctista/recovery.hpp"
#include "ctista/scenarios.hpp"
#include "ctista/training.hpp"

namespace ctista {

inline constexpr const char* kToolVersion = "1.0.0";

/// Worker count: CTISTA_THREADS if set, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("CTISTA_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1U;
}

/// Calls fn(i) for i in [0, count) on up to worker_count() threads.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline CtistaModel make_model(const Scenario& s) {
  return CtistaModel(s.A, s.f, s.shrinkage(), s.config.T, s.config.hermitian_step);
}

/// AMP baseline settings matching the scenario prior (complex variances).
inline AmpConfig amp_config(const Scenario& s, int iterations) {
  AmpConfig c;
  c.iterations = iterations;
  c.p = s.config.p;
  c.var = s.config.sigma_x2;
  c.noise_var = s.noise_var;
  c.denoiser = s.config.amp_soft ? AmpDenoiser::soft : AmpDenoiser::bayes;
  return c;
}

enum class Detector { ctista, zf, amp, dft };

inline std::string to_string(Detector d) {
  switch (d) {
    case Detector::ctista: return "ctista";
    case Detector::zf: return "zf";
    case Detector::amp: return "amp";
    case Detector::dft: return "dft";
  }
  return "?";
}

inline Detector parse_detector(const std::string& s) {
  if (s == "zf") return Detector::zf;
  if (s == "amp") return Detector::amp;
  if (s == "dft") return Detector::dft;
  if (s == "ctista") return Detector::ctista;
  throw ConfigError("unknown baseline '" + s + "'");
}

inline constexpr Eigen::Index kEvalChunk = 100;

/// Per-layer NMSE for C-TISTA (and optionally AMP and ZF) over fresh instances.
struct IterSweepRow {
  int t;
  std::string algorithm;
  double nmse_db;
  long long trials;
  double stderr_db;
};

inline std::vector<IterSweepRow> sweep_iterations(const Scenario& s, const CtistaModel& model,
                                                  const CtistaParams& params, int trials, bool with_amp,
                                                  bool with_zf = false, std::uint64_t tag = 0) {
  const int layers = model.layers();
  const std::size_t chunks = static_cast<std::size_t>((trials + kEvalChunk - 1) / kEvalChunk);
  struct ChunkAcc {
    std::vector<NmseAccumulator> ctista, amp;
    NmseAccumulator zf;
  };
  std::vector<ChunkAcc> acc(chunks);
  const AmpConfig amp_cfg = amp_config(s, layers);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index count = std::min<Eigen::Index>(kEvalChunk, trials - static_cast<Eigen::Index>(c) * kEvalChunk);
    RngStream rng(s.config.seed, streams::eval(tag, c));
    const InstanceBatch b = generate_batch(s, count, rng);
    std::vector<CMatrix> iters;
    ForwardOptions opt;
    opt.iterates = &iters;
    forward_batch(model, params, b.Y, opt);
    ChunkAcc& a = acc[c];
    a.ctista.assign(static_cast<std::size_t>(layers), {});
    a.amp.assign(static_cast<std::size_t>(layers), {});
    for (Eigen::Index j = 0; j < count; ++j) {
      const CVector x = b.X.col(j);
      for (int t = 0; t < layers; ++t) a.ctista[static_cast<std::size_t>(t)].add(iters[static_cast<std::size_t>(t)].col(j), x);
      if (with_zf) a.zf.add(model.W() * b.Y.col(j), x);
      if (with_amp) {
        const WidenedAmpResult r = widened_amp_recover(s.A, b.Y.col(j), amp_cfg);
        for (int t = 0; t < layers; ++t) a.amp[static_cast<std::size_t>(t)].add(r.iterates[static_cast<std::size_t>(t)], x);
      }
    }
  });
  std::vector<NmseAccumulator> ct(static_cast<std::size_t>(layers)), am(static_cast<std::size_t>(layers));
  NmseAccumulator zf;
  for (const auto& a : acc) {
    for (int t = 0; t < layers; ++t) {
      ct[static_cast<std::size_t>(t)].merge(a.ctista[static_cast<std::size_t>(t)]);
      am[static_cast<std::size_t>(t)].merge(a.amp[static_cast<std::size_t>(t)]);
    }
    zf.merge(a.zf);
  }
  std::vector<IterSweepRow> rows;
  for (int t = 0; t < layers; ++t) {
    const auto& c = ct[static_cast<std::size_t>(t)];
    rows.push_back({t + 1, "ctista", c.db(), c.count, c.stderr_db()});
  }
  if (with_amp) {
    for (int t = 0; t < layers; ++t) {
      const auto& c = am[static_cast<std::size_t>(t)];
      rows.push_back({t + 1, "amp", c.db(), c.count, c.stderr_db()});
    }
  }
  if (with_zf) {
    for (int t = 0; t < layers; ++t) rows.push_back({t + 1, "zf", zf.db(), zf.count, zf.stderr_db()});
  }
  return rows;
}

struct PointResult {
  MseAccumulator mse;
  SerAccumulator ser;
  NmseAccumulator nmse;
};

/// Evaluates the given detectors on shared instances. With `escalate_ser`
/// the trial count grows in fixed waves until every detector has at least
/// ser_min_errors symbol errors or ser_max_trials blocks were used.
inline std::map<Detector, PointResult> evaluate_point(const Scenario& s, const CtistaModel& model,
                                                      const CtistaParams& params, const std::vector<Detector>& detectors,
                                                      int trials, bool escalate_ser, std::uint64_t tag) {
  std::map<Detector, PointResult> out;
  for (Detector d : detectors) out[d];
  const CMatrix dft = s.config.matrix == MatrixEnsemble::idft ? s.A : CMatrix();
  const AmpConfig amp_cfg = amp_config(s, model.layers());

  auto run_chunk = [&](std::size_t c, Eigen::Index count) {
    RngStream rng(s.config.seed, streams::eval(tag, c));
    const InstanceBatch b = generate_batch(s, count, rng);
    std::map<Detector, PointResult> part;
    for (Detector d : detectors) {
      CMatrix est;
      switch (d) {
        case Detector::ctista: est = forward_batch(model, params, b.Y); break;
        case Detector::zf: est = model.W() * b.Y; break;
        case Detector::dft:
          if (dft.size() == 0) throw ConfigError("dft baseline needs the idft matrix ensemble");
          est = dft_soft(dft, b.Y);
          break;
        case Detector::amp: {
          if (s.constellation) throw ConfigError("amp baseline needs the sparse source");
          est.resize(b.X.rows(), count);
          for (Eigen::Index j = 0; j < count; ++j) est.col(j) = widened_amp_recover(s.A, b.Y.col(j), amp_cfg).estimate;
          break;
        }
      }
      PointResult& pr = part[d];
      for (Eigen::Index j = 0; j < count; ++j) {
        const CVector xhat = est.col(j);
        const CVector x = b.X.col(j);
        pr.mse.add(xhat, x);
        pr.nmse.add(xhat, x);
        if (s.constellation) pr.ser.add(xhat, x, *s.constellation);
      }
    }
    return part;
  };

  auto merge = [&](const std::map<Detector, PointResult>& part) {
    for (const auto& [d, pr] : part) {
      out[d].mse.merge(pr.mse);
      out[d].ser.merge(pr.ser);
      out[d].nmse.merge(pr.nmse);
    }
  };

  auto run_range = [&](std::size_t first_chunk, std::size_t n_chunks, long long first_trial, long long limit) {
    std::vector<std::map<Detector, PointResult>> parts(n_chunks);
    parallel_for(n_chunks, [&](std::size_t k) {
      const long long start = first_trial + static_cast<long long>(k) * kEvalChunk;
      const auto count = static_cast<Eigen::Index>(std::min<long long>(kEvalChunk, limit - start));
      if (count > 0) parts[k] = run_chunk(first_chunk + k, count);
    });
    for (const auto& p : parts) merge(p);
  };

  const std::size_t base_chunks = static_cast<std::size_t>((trials + kEvalChunk - 1) / kEvalChunk);
  run_range(0, base_chunks, 0, trials);
  if (!escalate_ser || !s.constellation) return out;

  const long long cap = std::max<long long>(trials, s.config.ser_max_trials);
  long long done = trials;
  std::size_t next_chunk = base_chunks;
  constexpr std::size_t kWave = 10;
  auto satisfied = [&] {
    for (const auto& [d, pr] : out) {
      if (pr.ser.errors < s.config.ser_min_errors) return false;
    }
    return true;
  };
  // continue on chunk boundaries so the result does not depend on the worker count
  if (done % kEvalChunk != 0) done = static_cast<long long>(base_chunks) * kEvalChunk;
  while (!satisfied() && done < cap) {
    const long long limit = std::min<long long>(cap, done + static_cast<long long>(kWave) * kEvalChunk);
    const std::size_t n_chunks = static_cast<std::size_t>((limit - done + kEvalChunk - 1) / kEvalChunk);
    run_range(next_chunk, n_chunks, done, limit);
    next_chunk += n_chunks;
    done = limit;
  }
  return out;
}

struct SnrSweepRow {
  double snr_db;
  std::string algorithm;
  double mse;
  double ser;
  long long trials;
  long long symbol_errors;
};

/// How C-TISTA parameters are obtained for each SNR point.
struct ParamSource {
  std::optional<CtistaParams> fixed;  ///< use these everywhere
  bool untrained = false;             ///< use the initialisation
};

inline std::vector<SnrSweepRow> sweep_snr(const Scenario& base, const CtistaModel& model, const ParamSource& src,
                                          const std::vector<Detector>& baselines, int trials,
                                          std::vector<TrainReport>* reports = nullptr) {
  std::vector<SnrSweepRow> rows;
  std::optional<CtistaParams> shared = src.fixed;
  if (!shared && !src.untrained && !base.config.train_per_snr) {
    TrainReport r = incremental_train(base, model, TrainOptions::from(base.config));
    shared = r.params;
    if (reports) reports->push_back(std::move(r));
  }
  std::vector<Detector> detectors{Detector::ctista};
  for (Detector d : baselines) {
    if (d != Detector::ctista) detectors.push_back(d);
  }
  for (std::size_t k = 0; k < base.config.snr_grid.size(); ++k) {
    const double snr = base.config.snr_grid[k];
    const Scenario s = base.with_snr(snr);
    CtistaParams params;
    if (shared) {
      params = *shared;
    } else if (src.untrained) {
      params = initial_params(s, model);
    } else {
      TrainReport r = incremental_train(s, model, TrainOptions::from(s.config));
      params = r.params;
      if (reports) reports->push_back(std::move(r));
    }
    const auto res = evaluate_point(s, model, params, detectors, trials, true, 1 + k);
    for (Detector d : detectors) {
      const PointResult& pr = res.at(d);
      rows.push_back({snr, to_string(d), pr.mse.mean(), pr.ser.rate(), pr.mse.count, pr.ser.errors});
    }
  }
  return rows;
}

struct ScatterRow {
  double re;
  double im;
  std::string algorithm;
};

/// Soft estimates of one block (C-TISTA output and the DFT receiver output).
inline std::vector<ScatterRow> scatter_block(const Scenario& s, const CtistaModel& model, const CtistaParams& params,
                                             std::uint64_t tag = 999) {
  if (s.config.matrix != MatrixEnsemble::idft) throw ConfigError("scatter needs the clipped-ofdm scenario");
  RngStream rng(s.config.seed, streams::eval(tag, 0));
  const InstanceBatch b = generate_batch(s, 1, rng);
  const CVector ct = forward_batch(model, params, b.Y).col(0);
  const CVector dft = dft_soft(s.A, b.Y).col(0);
  std::vector<ScatterRow> rows;
  for (Eigen::Index i = 0; i < ct.size(); ++i) rows.push_back({ct(i).real(), ct(i).imag(), "ctista"});
  for (Eigen::Index i = 0; i < dft.size(); ++i) rows.push_back({dft(i).real(), dft(i).imag(), "dft"});
  return rows;
}

// ---------------------------------------------------------------------------
// CSV output. The first line is a provenance comment, the second the header.

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

inline void write_provenance(std::ostream& os, const ScenarioConfig& c) {
  os << "# config_digest=" << config_digest(c) << " seed=" << c.seed << " tool_version=" << kToolVersion << "\n";
}

inline void write_csv(std::ostream& os, const ScenarioConfig& c, const std::vector<IterSweepRow>& rows) {
  write_provenance(os, c);
  os << "t,algorithm,nmse_db,trials,stderr_db\n";
  for (const auto& r : rows) {
    os << r.t << ',' << r.algorithm << ',' << format_number(r.nmse_db) << ',' << r.trials << ','
       << format_number(r.stderr_db) << "\n";
  }
}

inline void write_csv(std::ostream& os, const ScenarioConfig& c, const std::vector<SnrSweepRow>& rows) {
  write_provenance(os, c);
  os << "snr_db,algorithm,mse,ser,trials\n";
  for (const auto& r : rows) {
    os << format_number(r.snr_db) << ',' << r.algorithm << ',' << format_number(r.mse) << ','
       << format_number(r.ser) << ',' << r.trials << "\n";
  }
}

inline void write_csv(std::ostream& os, const ScenarioConfig& c, const std::vector<ScatterRow>& rows) {
  write_provenance(os, c);
  os << "re,im,algorithm\n";
  for (const auto& r : rows) os << format_number(r.re) << ',' << format_number(r.im) << ',' << r.algorithm << "\n";
}

/// Training sidecar: loss curve per generation, final parameters, timing and seeds.
inline nlohmann::json report_to_json(const TrainReport& r, const ScenarioConfig& c) {
  nlohmann::json j;
  j["scenario_digest"] = config_digest(c);
  j["seed"] = r.seed;
  j["wall_seconds"] = r.wall_seconds;
  j["params"] = params_to_json(r.params, config_digest(c), r.seed);
  j["initial_params"] = params_to_json(r.initial, config_digest(c), r.seed);
  j["generations"] = nlohmann::json::array();
  for (const auto& g : r.generations) {
    j["generations"].push_back({{"generation", g.generation},
                                {"optimized_scalars", g.optimized_scalars},
                                {"final_loss", g.final_loss},
                                {"losses", g.losses}});
  }
  j["train_streams"] = r.streams_used;
  return j;
}

}  // namespace ctista
