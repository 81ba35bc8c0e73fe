// Command-line driver: train, sweep-iter, sweep-snr, scatter, selftest.
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 divergence, 4 I/O error.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctista/ctista.hpp"

namespace {

using namespace ctista;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config;
  std::string params;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool untrained = false;
  bool train = false;
  std::vector<std::string> baselines;
};

ScenarioConfig load(const CommonArgs& args) {
  ScenarioConfig cfg = load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (args.trials) cfg.trials = *args.trials;
  cfg.validate();
  return cfg;
}

// Writes through a temporary stream so a failed run never leaves a partial file.
template <class WriteFn>
void emit(const std::string& path, WriteFn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write(os);
  os.flush();
  if (!os) throw IoError("failed writing '" + path + "'");
}

void write_json(const std::string& path, const nlohmann::json& j) {
  emit(path, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

CtistaParams resolve_params(const CommonArgs& args, const Scenario& s, const CtistaModel& model) {
  const int modes = int(!args.params.empty()) + int(args.untrained) + int(args.train);
  if (modes != 1) throw ConfigError("exactly one of --params, --untrained or --train is required");
  if (args.untrained) return initial_params(s, model);
  if (args.train) return incremental_train(s, model, TrainOptions::from(s.config)).params;
  return load_params(args.params, model.layers()).params;
}

int cmd_train(const CommonArgs& args) {
  if (args.out.empty()) throw ConfigError("train: --out <params.json> is required");
  const ScenarioConfig cfg = load(args);
  const Scenario s(cfg);
  const CtistaModel model = make_model(s);
  const TrainReport report = incremental_train(s, model, TrainOptions::from(cfg));
  save_params(report.params, args.out, config_digest(cfg), cfg.seed);
  write_json(args.out + ".report.json", report_to_json(report, cfg));
  std::cerr << "trained " << 3 * report.params.layers() << " scalars in " << report.wall_seconds << " s; final loss "
            << (report.generations.empty() ? 0.0 : report.generations.back().final_loss) << "\n";
  return kExitOk;
}

int cmd_sweep_iter(const CommonArgs& args) {
  const ScenarioConfig cfg = load(args);
  const Scenario s(cfg);
  const CtistaModel model = make_model(s);
  const CtistaParams params = resolve_params(args, s, model);
  bool amp = false;
  bool zf = false;
  for (const auto& b : args.baselines) {
    const Detector d = parse_detector(b);
    if (d == Detector::amp) amp = true;
    else if (d == Detector::zf) zf = true;
    else throw ConfigError("sweep-iter supports --baseline amp or zf");
  }
  const auto rows = sweep_iterations(s, model, params, cfg.trials, amp, zf);
  emit(args.out, [&](std::ostream& os) { write_csv(os, cfg, rows); });
  return kExitOk;
}

int cmd_sweep_snr(const CommonArgs& args) {
  const ScenarioConfig cfg = load(args);
  if (cfg.snr_grid.empty()) throw ConfigError("sweep-snr: snr_grid is empty");
  const Scenario s(cfg);
  const CtistaModel model = make_model(s);
  ParamSource src;
  const int modes = int(!args.params.empty()) + int(args.untrained) + int(args.train);
  if (modes != 1) throw ConfigError("exactly one of --params, --untrained or --train is required");
  if (!args.params.empty()) src.fixed = load_params(args.params, model.layers()).params;
  src.untrained = args.untrained;
  std::vector<Detector> baselines;
  for (const auto& b : args.baselines) baselines.push_back(parse_detector(b));
  if (baselines.empty()) {
    baselines.push_back(Detector::zf);
    if (cfg.matrix == MatrixEnsemble::idft) baselines.push_back(Detector::dft);
  }
  std::vector<TrainReport> reports;
  const auto rows = sweep_snr(s, model, src, baselines, cfg.trials, &reports);
  emit(args.out, [&](std::ostream& os) { write_csv(os, cfg, rows); });
  if (!reports.empty() && !args.out.empty() && args.out != "-") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(report_to_json(r, cfg));
    write_json(args.out + ".report.json", j);
  }
  return kExitOk;
}

int cmd_scatter(const CommonArgs& args) {
  const ScenarioConfig cfg = load(args);
  const Scenario s(cfg);
  const CtistaModel model = make_model(s);
  const CtistaParams params = resolve_params(args, s, model);
  const auto rows = scatter_block(s, model, params);
  emit(args.out, [&](std::ostream& os) { write_csv(os, cfg, rows); });
  return kExitOk;
}

// Quick internal consistency checks, for a freshly built binary.
int cmd_selftest() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };
  RngStream rng(7, 1);

  double worst = 0.0;
  const ComponentwiseMap clip = clip_map(1.0);
  for (int k = 0; k < 100; ++k) {
    cplx z = draw_cgaussian(rng, 2.0);
    if (std::abs(std::abs(z) - 1.0) < 1e-3) continue;
    const WirtingerPair fd = wirtinger_fd(clip, z);
    const WirtingerJet j = clip.jet(z);
    worst = std::max({worst, std::abs(fd.dz - j.dz) / std::max(1.0, std::abs(j.dz)),
                      std::abs(fd.dzc - j.dzc) / std::max(1.0, std::abs(j.dzc))});
  }
  report("clip Wirtinger derivatives vs finite differences", worst <= 1e-5);

  const CMatrix a = sample_cgaussian(0.0, 1.0, rng, 4 * 8).reshaped(4, 8);
  const CMatrix w = pseudo_inverse(a);
  report("pseudo-inverse A W = I", (a * w - CMatrix::Identity(4, 4)).norm() <= 1e-10);

  const CMatrix f = idft_matrix(16);
  report("IDFT unitary", (f.adjoint() * f - CMatrix::Identity(16, 16)).cwiseAbs().maxCoeff() <= 1e-10);

  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioKind::cs_sparse);
  cfg.n = 16;
  cfg.m = 8;
  cfg.T = 3;
  const Scenario s(cfg);
  const CtistaModel model = make_model(s);
  RngStream brng(cfg.seed, streams::eval(0, 0));
  const InstanceBatch batch = generate_batch(s, 4, brng);
  const CtistaParams p = initial_params(3, s.noise_var);
  const std::vector<double> g_fd = grad_fd(model, batch, p, 3);
  const std::vector<double> g_ad = grad_adjoint(model, p, batch, 3).gradient;
  double scale = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < g_fd.size(); ++i) {
    scale = std::max(scale, std::abs(g_fd[i]));
    err = std::max(err, std::abs(g_fd[i] - g_ad[i]));
  }
  report("adjoint gradient vs finite differences", err <= 1e-4 * std::max(scale, 1e-12));
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-TISTA experiment runner"};
  app.require_subcommand(1);
  CommonArgs args;

  auto add_common = [&](CLI::App* sub, bool needs_params) {
    sub->add_option("--config", args.config, "scenario config file")->required();
    sub->add_option("--out", args.out, "output path (stdout when omitted)");
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--trials", args.trials, "override the evaluation trial count");
    if (needs_params) {
      sub->add_option("--params", args.params, "trained parameter file");
      sub->add_flag("--untrained", args.untrained, "use the initial parameters");
      sub->add_flag("--train", args.train, "train in-process before evaluating");
    }
  };

  CLI::App* train = app.add_subcommand("train", "run incremental training and write the parameter file");
  add_common(train, false);
  CLI::App* iter = app.add_subcommand("sweep-iter", "NMSE against layer index");
  add_common(iter, true);
  iter->add_option("--baseline", args.baselines, "extra curves: amp, zf");
  CLI::App* snr = app.add_subcommand("sweep-snr", "MSE and SER against SNR");
  add_common(snr, true);
  snr->add_option("--baseline", args.baselines, "baselines: zf, dft, amp");
  CLI::App* scatter = app.add_subcommand("scatter", "soft estimates of one OFDM block");
  add_common(scatter, true);
  CLI::App* selftest = app.add_subcommand("selftest", "internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(args);
    if (*iter) return cmd_sweep_iter(args);
    if (*snr) return cmd_sweep_snr(args);
    if (*scatter) return cmd_scatter(args);
    if (*selftest) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
