// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [criterion ...] [--cache DIR] [--cli PATH]
//
// With no criterion arguments every criterion runs. Trained parameters are
// cached under DIR keyed by the scenario digest, so criteria sharing a
// scenario train it once. Exit status is 0 only if every selected criterion
// passes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctista/ctista.hpp"

#ifndef CTISTA_CLI_PATH
#define CTISTA_CLI_PATH "ctista_cli"
#endif

namespace fs = std::filesystem;
using namespace ctista;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> info;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

fs::path g_cache = "acceptance_cache";
std::string g_cli = CTISTA_CLI_PATH;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double rel(cplx got, cplx want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

CtistaParams trained_params(const Scenario& s, const CtistaModel& model) {
  fs::create_directories(g_cache);
  const fs::path file = g_cache / (config_digest(s.config) + ".json");
  if (fs::exists(file)) return load_params(file.string(), model.layers()).params;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport r = incremental_train(s, model, TrainOptions::from(s.config));
  std::cerr << "  trained " << to_string(s.config.kind) << " (" << config_digest(s.config) << ") in "
            << fmt(seconds_since(t0), 3) << " s\n";
  save_params(r.params, file.string(), config_digest(s.config), s.config.seed);
  return r.params;
}

// 1 -------------------------------------------------------------------------

void wirtinger_oracles(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string name;
    ComponentwiseMap f;
    double alpha;  // radius of the non-smooth circle, 0 when smooth
  };
  const std::vector<Case> cases{{"identity", ComponentwiseMap::identity(), 0.0},
                                {"clip(1.5)", clip_map(1.5), 1.5},
                                {"z+0.1z^2", ComponentwiseMap::polynomial({0.0, 1.0, 0.1}), 0.0}};
  RngStream rng(101, 1);
  for (const auto& c : cases) {
    double worst = 0.0;
    int points = 0;
    while (points < 100) {
      const cplx z = draw_cgaussian(rng, 4.0);
      if (c.alpha > 0.0 && std::abs(std::abs(z) - c.alpha) < 1e-3) continue;
      const WirtingerPair fd = wirtinger_fd(c.f, z);
      const WirtingerJet j = c.f.jet(z);
      worst = std::max({worst, rel(j.dz, fd.dz), rel(j.dzc, fd.dzc)});
      ++points;
    }
    o.detail << " " << c.name << "=" << fmt(worst, 2);
    o.require(worst <= 1e-5, c.name + " relative error");
  }
  const double secs = seconds_since(t0);
  o.detail << " time=" << fmt(secs, 2) << "s";
  o.require(secs < 1.0, "runtime");
}

// 2 -------------------------------------------------------------------------

void gradient_directional(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  double worst_order = 10.0;
  int done = 0;
  for (int inst = 0; inst < 20; ++inst) {
    RngStream rng(202, static_cast<std::uint64_t>(inst));
    const int m = 10, n = 16;
    const CMatrix a = sample_cgaussian(0.0, 1.0 / m, rng, m * n).reshaped(m, n);
    const CVector x = sample_cgaussian(0.0, 1.0, rng, n);
    const CVector d = sample_cgaussian(0.0, 1.0, rng, n);
    const CVector u = a * x;
    const bool clipped = inst % 2 == 1;
    double alpha = 0.0;
    if (clipped) {
      // clip level in the widest gap between the middle magnitudes
      std::vector<double> mags(m);
      for (int i = 0; i < m; ++i) mags[i] = std::abs(u(i));
      std::sort(mags.begin(), mags.end());
      double gap = -1.0;
      for (int i = 2; i < m - 2; ++i) {
        if (mags[i + 1] - mags[i] > gap) {
          gap = mags[i + 1] - mags[i];
          alpha = 0.5 * (mags[i] + mags[i + 1]);
        }
      }
    }
    const ComponentwiseMap f = clipped ? clip_map(alpha) : ComponentwiseMap::identity();
    const CVector y = f.apply(a * sample_cgaussian(0.0, 1.0, rng, n)) + sample_cgaussian(0.0, 0.01, rng, m);

    // g(x + e d) - g(x) ~ e * 4 Re<grad_lms, d> (grad_lms is half the conjugate gradient)
    const double analytic = 4.0 * grad_lms(a, y, f, x).dot(d).real();
    const double g0 = lms_objective(a, y, f, x);
    std::vector<double> eps{1e-3, 1e-4, 1e-5};
    std::vector<double> remainder;
    const CVector ad = a * d;
    bool crosses = false;
    for (double e : eps) {
      if (clipped) {
        for (int i = 0; i < m; ++i) {
          if (std::abs(std::abs(u(i)) - alpha) <= 2.0 * e * std::abs(ad(i))) crosses = true;
        }
      }
      remainder.push_back(std::abs(lms_objective(a, y, f, x + e * d) - g0 - e * analytic));
    }
    if (crosses) {
      // the path meets the clipping circle, so second-order falloff does not apply
      o.require(false, "instance " + std::to_string(inst) + " crosses the clip circle");
      continue;
    }
    const double h = 1e-6;
    const double central = (lms_objective(a, y, f, x + h * d) - lms_objective(a, y, f, x - h * d)) / (2.0 * h);
    worst = std::max(worst, std::abs(central - analytic) / std::max(1.0, std::abs(analytic)));
    for (std::size_t k = 1; k < eps.size(); ++k) {
      if (remainder[k] < 1e-13 * std::max(1.0, g0)) continue;  // at the rounding floor
      worst_order = std::min(worst_order, std::log10(remainder[k - 1] / remainder[k]));
    }
    ++done;
  }
  const double secs = seconds_since(t0);
  o.detail << " instances=" << done << " rel=" << fmt(worst, 2) << " falloff_order=" << fmt(worst_order, 3)
           << " time=" << fmt(secs, 2) << "s";
  o.require(done == 20, "20 instances");
  o.require(worst <= 1e-4, "relative error");
  o.require(worst_order >= 1.8, "second-order falloff");
  o.require(secs < 5.0, "runtime");
}

// 3 -------------------------------------------------------------------------

void linear_algebra(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(303, 3);
  double mp = 0.0;
  for (auto [m, n] : std::vector<std::pair<int, int>>{{8, 16}, {64, 128}, {150, 300}, {160, 200}, {30, 20}}) {
    const CMatrix a = sample_cgaussian(0.0, 1.0, rng, m * n).reshaped(m, n);
    const CMatrix w = pseudo_inverse(a);
    const double s = a.norm();
    mp = std::max({mp, (a * w * a - a).norm() / s, (w * a * w - w).norm() / w.norm(),
                   (a * w - (a * w).adjoint()).norm(), (w * a - (w * a).adjoint()).norm()});
  }
  const CMatrix f = idft_matrix(128);
  const double unitary = (f.adjoint() * f - CMatrix::Identity(128, 128)).cwiseAbs().maxCoeff();
  const CMatrix a = sample_cgaussian(0.0, 1.0, rng, 12 * 7).reshaped(12, 7);
  const CMatrix b = sample_cgaussian(0.0, 1.0, rng, 7 * 5).reshaped(7, 5);
  const CVector v = sample_cgaussian(0.0, 1.0, rng, 7);
  const double widen_err = std::max({(widen_matrix(a * b) - widen_matrix(a) * widen_matrix(b)).norm(),
                                     (widen_matrix(a) * widen_vector(v) - widen_vector(a * v)).norm(),
                                     (narrow_vector(widen_vector(v)) - v).norm()});
  const double secs = seconds_since(t0);
  o.detail << " moore_penrose=" << fmt(mp, 2) << " idft=" << fmt(unitary, 2) << " widen=" << fmt(widen_err, 2)
           << " time=" << fmt(secs, 2) << "s";
  o.require(mp <= 1e-9, "Moore-Penrose identities");
  o.require(unitary <= 1e-12, "IDFT unitarity");
  o.require(widen_err <= 1e-12, "widening homomorphism");
  o.require(secs < 5.0, "runtime");
}

// 4 -------------------------------------------------------------------------

void cs_anchor(Outcome& o) {
  ScenarioConfig c = ScenarioConfig::defaults(ScenarioKind::cs_sparse);
  c.n = 300;
  c.m = 150;
  c.p = 0.1;
  c.noise_var = 0.0004;
  c.T = 12;
  c.K = 200;
  c.L = 200;
  c.trials = 500;
  const Scenario s(c);
  const CtistaModel model = make_model(s);
  const CtistaParams params = trained_params(s, model);
  const auto rows = sweep_iterations(s, model, params, c.trials, true, true, 40);
  std::map<std::string, std::vector<double>> curve;
  for (const auto& r : rows) curve[r.algorithm].push_back(r.nmse_db);
  const double ct = curve["ctista"].back();
  const double amp = curve["amp"].back();
  const double zf = curve["zf"].back();
  o.detail << " trials=" << c.trials << " ctista(T=12)=" << fmt(ct) << " dB amp(T=12)=" << fmt(amp)
           << " dB zf=" << fmt(zf) << " dB";
  o.require(std::abs(amp + 22.0) <= 3.0, "AMP within -22 +/- 3 dB");
  o.require(ct <= amp, "C-TISTA <= AMP");
  o.require(ct <= -25.0, "C-TISTA <= -25 dB");
  bool monotone = true;
  for (std::size_t t = 1; t < curve["ctista"].size(); ++t) monotone = monotone && curve["ctista"][t] <= curve["ctista"][t - 1];
  o.info.push_back("ordering C-TISTA <= AMP <= ZF: " + std::string(ct <= amp && amp <= zf ? "yes" : "no") +
                   "; C-TISTA NMSE non-increasing in t: " + (monotone ? "yes" : "no") +
                   "; reference value with full training: -30 dB");
}

// 5, 6 ----------------------------------------------------------------------

Scenario psk_scenario() {
  ScenarioConfig c = ScenarioConfig::defaults(ScenarioKind::psk8_under);
  c.n = 200;
  c.m = 160;
  c.T = 10;
  c.K = 500;
  c.L = 200;
  c.lr = 0.0005;
  c.snr_db = 20.0;
  c.trials = 500;
  c.snr_grid = {5, 7.5, 10, 12.5, 15, 17.5, 20, 22.5, 25};
  return Scenario(c);
}

void psk_ratio(Outcome& o) {
  const Scenario s = psk_scenario();
  const CtistaModel model = make_model(s);
  const CtistaParams params = trained_params(s, model);
  const auto res = evaluate_point(s, model, params, {Detector::ctista, Detector::zf}, s.config.trials, false, 50);
  const double ct = res.at(Detector::ctista).mse.mean();
  const double zf = res.at(Detector::zf).mse.mean();
  o.detail << " trials=" << res.at(Detector::ctista).mse.count << " mse_ctista=" << fmt(ct) << " mse_zf=" << fmt(zf)
           << " ratio=" << fmt(ct / zf);
  o.require(res.at(Detector::ctista).mse.count >= 500, "at least 500 trials");
  o.require(ct / zf <= 0.2, "ratio <= 0.2");
  o.info.push_back("reference values: C-TISTA 9.0e-3, ZF 1.1e-1 (ratio 0.082)");
}

void psk_ser_order(Outcome& o) {
  const Scenario s = psk_scenario();
  const CtistaModel model = make_model(s);
  ParamSource src;
  src.fixed = trained_params(s, model);
  const auto rows = sweep_snr(s, model, src, {Detector::zf}, s.config.trials);
  std::map<double, std::map<std::string, SnrSweepRow>> by;
  for (const auto& r : rows) by[r.snr_db].emplace(r.algorithm, r);
  for (const auto& [snr, algs] : by) {
    if (snr < 15.0) continue;
    const auto& ct = algs.at("ctista");
    const auto& zf = algs.at("zf");
    o.detail << " " << fmt(snr) << "dB:" << fmt(ct.ser, 3) << "<" << fmt(zf.ser, 3) << "(zf_err=" << zf.symbol_errors
             << ")";
    o.require(ct.ser < zf.ser, "SER order at " + fmt(snr) + " dB");
    o.require(zf.symbol_errors >= 100, "ZF errors at " + fmt(snr) + " dB");
  }
}

// 7 -------------------------------------------------------------------------

Scenario ofdm_scenario(double papr) {
  ScenarioConfig c = ScenarioConfig::defaults(ScenarioKind::clipped_ofdm);
  c.n = 128;
  c.m = 128;
  c.T = 10;
  c.K = 500;
  c.L = 200;
  c.papr_db = papr;
  c.snr_db = 17.5;
  c.trials = 500;
  c.snr_grid = {5, 7.5, 10, 12.5, 15, 17.5, 20, 22.5, 25, 27.5, 30};
  return Scenario(c);
}

// SNR where an SER curve first falls to `target`, by linear interpolation of
// log10(SER) in SNR. A zero-error point counts as half an error.
std::optional<double> snr_at_ser(const std::vector<SnrSweepRow>& rows, const std::string& alg, double target,
                                 int symbols_per_trial) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    if (r.algorithm != alg) continue;
    const double floor = 0.5 / (static_cast<double>(r.trials) * symbols_per_trial);
    pts.emplace_back(r.snr_db, std::log10(std::max(r.ser, floor)));
  }
  const double lt = std::log10(target);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const auto [s0, l0] = pts[k - 1];
    const auto [s1, l1] = pts[k];
    if (l0 >= lt && l1 <= lt) return l0 == l1 ? s0 : s0 + (lt - l0) * (s1 - s0) / (l1 - l0);
  }
  if (!pts.empty() && pts.front().second <= lt) return pts.front().first;
  return std::nullopt;
}

void ofdm_anchors(Outcome& o) {
  // (a)
  const Scenario s3 = ofdm_scenario(3.0);
  const CtistaModel m3 = make_model(s3);
  const CtistaParams p3 = trained_params(s3, m3);
  const auto res = evaluate_point(s3, m3, p3, {Detector::ctista, Detector::dft}, s3.config.trials, false, 70);
  const double ct = res.at(Detector::ctista).mse.mean();
  const double dft = res.at(Detector::dft).mse.mean();
  o.detail << " (a) mse_ctista=" << fmt(ct) << " mse_dft=" << fmt(dft) << " ratio=" << fmt(ct / dft);
  o.require(ct / dft <= 0.05, "(a) ratio <= 0.05");
  o.info.push_back("reference values at PAPR 3 dB, 17.5 dB: C-TISTA 2.4e-5, DFT 5.1e-3 (measured " + fmt(ct) + ", " +
                   fmt(dft) + ")");

  // (b), (c)
  const Scenario s5 = ofdm_scenario(5.0);
  const CtistaModel m5 = make_model(s5);
  ParamSource src5;
  src5.fixed = trained_params(s5, m5);
  ParamSource src3;
  src3.fixed = p3;
  const auto rows5 = sweep_snr(s5, m5, src5, {Detector::dft}, s5.config.trials);
  const auto rows3 = sweep_snr(s3, m3, src3, {Detector::dft}, s3.config.trials);
  auto curve = [](const std::vector<SnrSweepRow>& rows, const std::string& alg) {
    std::ostringstream os;
    for (const auto& r : rows) {
      if (r.algorithm == alg) os << (os.tellp() > 0 ? "," : "") << fmt(r.ser, 3);
    }
    return os.str();
  };
  o.info.push_back("PAPR 5 dB SER ctista: " + curve(rows5, "ctista"));
  o.info.push_back("PAPR 5 dB SER dft: " + curve(rows5, "dft"));
  o.info.push_back("PAPR 3 dB SER ctista: " + curve(rows3, "ctista"));
  o.info.push_back("PAPR 3 dB SER dft: " + curve(rows3, "dft"));
  const auto dft5 = snr_at_ser(rows5, "dft", 1e-3, 128);
  const auto ct5 = snr_at_ser(rows5, "ctista", 1e-3, 128);
  const auto ct3 = snr_at_ser(rows3, "ctista", 1e-3, 128);
  auto show = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("none"); };
  o.detail << " (b) snr@1e-3 dft=" << show(dft5) << " ctista=" << show(ct5);
  o.require(dft5 && ct5 && *dft5 - *ct5 >= 1.5, "(b) gain >= 1.5 dB");
  o.detail << " (c) ctista papr3=" << show(ct3) << " papr5=" << show(ct5);
  o.require(ct3 && ct5 && std::abs(*ct3 - *ct5) <= 1.0, "(c) curves within 1 dB");
  o.info.push_back("reference gain at PAPR 5 dB: about 2.5 dB");
}

// 8 -------------------------------------------------------------------------

void training_machinery(Outcome& o) {
  // adjoint against central differences on smooth and clipped models
  double worst = 0.0;
  for (int variant = 0; variant < 3; ++variant) {
    ScenarioConfig c = ScenarioConfig::defaults(variant == 2 ? ScenarioKind::cs_sparse : ScenarioKind::psk8_under);
    c.n = 24;
    c.m = variant == 2 ? 12 : 20;
    c.T = 4;
    c.seed = 800 + static_cast<std::uint64_t>(variant);
    if (variant == 1) {
      c.clip = true;
      c.papr_db = 3.0;
    }
    if (variant != 2) c.snr_db = 12.0;
    const Scenario s(c);
    const CtistaModel model = make_model(s);
    RngStream rng(c.seed, streams::eval(80, 0));
    const InstanceBatch b = generate_batch(s, 8, rng);
    const CtistaParams p({0.9, 1.1, 0.7, 1.2}, {0.03, 0.02, 0.01, 0.01}, {1.2, 0.8, 1.0, 0.9});
    for (int t = 1; t <= 4; ++t) {
      const auto fd = grad_fd(model, b, p, t);
      const auto ad = grad_adjoint(model, p, b, t).gradient;
      for (std::size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, std::abs(fd[i] - ad[i]) / std::max(1.0, std::abs(fd[i])));
    }
  }
  o.detail << " adjoint_vs_fd=" << fmt(worst, 2);
  o.require(worst <= 1e-4, "adjoint vs finite differences");

  AdamState st(4, 0.01);
  const std::vector<double> theta{0.3, -1.0, 2.0, 0.0};
  const bool fixed = adam_step(st, theta, std::vector<double>(4, 0.0)) == theta;
  o.detail << " adam_fixed_point=" << (fixed ? "yes" : "no");
  o.require(fixed, "Adam zero-gradient fixed point");

  // held-out loss per generation, averaged over 5 seeds
  const int layers = 5;
  std::vector<double> trained(layers, 0.0), untrained(layers, 0.0);
  bool counts = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig c = ScenarioConfig::defaults(ScenarioKind::psk8_under);
    c.n = 40;
    c.m = 32;
    c.T = layers;
    c.K = 100;
    c.L = 50;
    c.snr_db = 15.0;
    c.seed = seed;
    const Scenario s(c);
    const CtistaModel model = make_model(s);
    const TrainReport r = incremental_train(s, model, TrainOptions::from(c));
    RngStream rng(seed, streams::eval(81, 0));
    const InstanceBatch held = generate_batch(s, 1000, rng);
    for (int t = 1; t <= layers; ++t) {
      const GenerationRecord& g = r.generations[static_cast<std::size_t>(t - 1)];
      counts = counts && g.optimized_scalars == 3 * t;
      trained[static_cast<std::size_t>(t - 1)] += batch_loss(model, g.params, held, t) / 5.0;
      untrained[static_cast<std::size_t>(t - 1)] += batch_loss(model, r.initial, held, t) / 5.0;
    }
  }
  o.detail << " scalars_3t=" << (counts ? "yes" : "no") << " held_out(trained/untrained):";
  bool better = true;
  for (int t = 0; t < layers; ++t) {
    o.detail << " " << fmt(trained[t], 3) << "/" << fmt(untrained[t], 3);
    better = better && trained[t] <= untrained[t];
  }
  o.require(counts, "3t scalars per generation");
  o.require(better, "held-out loss at every generation");
}

// 9 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void determinism(Outcome& o) {
  fs::create_directories(g_cache);
  const fs::path cfg = g_cache / "determinism.cfg";
  std::ofstream(cfg) << "kind = psk8-under\nn = 32\nm = 24\nsnr_db = 12\nT = 4\nK = 15\nL = 20\nseed = 9\n"
                        "trials = 200\nsnr_grid = 10, 14\nser_max_trials = 400\n";
  const fs::path ofdm = g_cache / "determinism_ofdm.cfg";
  std::ofstream(ofdm) << "kind = clipped-ofdm\nT = 3\nK = 5\nL = 10\nseed = 4\ntrials = 20\n";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"sweep-iter", "sweep-iter --config " + cfg.string() + " --train --baseline zf"},
      {"sweep-snr", "sweep-snr --config " + cfg.string() + " --untrained"},
      {"scatter", "scatter --config " + ofdm.string() + " --train"}};
  for (const auto& [name, args] : runs) {
    std::string outs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = g_cache / (name + "_" + std::to_string(k) + ".csv");
      const std::string env = k == 0 ? "CTISTA_THREADS=1 " : "CTISTA_THREADS=4 ";
      const int rc = std::system((env + g_cli + " " + args + " --out " + out.string() + " 2>/dev/null").c_str());
      o.require(rc == 0, name + " exit status");
      outs[k] = slurp(out);
    }
    const bool same = !outs[0].empty() && outs[0] == outs[1];
    o.detail << " " << name << "=" << (same ? "identical" : "differs");
    o.require(same, name + " byte-identical");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  std::string cache = g_cache.string();
  app.add_option("criteria", selected, "criterion numbers (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--cache", cache, "directory for trained parameters and scratch files");
  app.add_option("--cli", g_cli, "path to ctista_cli");
  CLI11_PARSE(app, argc, argv);
  g_cache = cache;

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"Wirtinger derivatives vs finite differences", wirtinger_oracles},
      {"grad_lms directional derivative", gradient_directional},
      {"linear-algebra invariants", linear_algebra},
      {"sparse recovery anchor (n=300, m=150, T=12, K=200)", cs_anchor},
      {"8-PSK MSE ratio at 20 dB", psk_ratio},
      {"8-PSK SER ordering above 15 dB", psk_ser_order},
      {"clipped OFDM anchors", ofdm_anchors},
      {"training machinery", training_machinery},
      {"CLI determinism", determinism}};
  if (selected.empty()) {
    for (int k = 1; k <= 9; ++k) selected.push_back(k);
  }

  int failures = 0;
  for (int k : selected) {
    const auto& [name, fn] = criteria[static_cast<std::size_t>(k - 1)];
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << name << " |" << o.detail.str() << " ("
              << fmt(seconds_since(t0), 3) << " s)\n";
    for (const auto& line : o.info) std::cout << "INFO criterion " << k << ": " << line << "\n";
    std::cout.flush();
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
