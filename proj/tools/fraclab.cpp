#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fraclab/bench.hpp"
#include "fraclab/ffpe.hpp"
#include "fraclab/manifest.hpp"
#include "fraclab/runner.hpp"
#include "fraclab/validation.hpp"

namespace fs = std::filesystem;
using namespace fraclab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerics = 4;
constexpr int kExitTelemetry = 5;

std::string fmtd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

FfpeProblem ffpe_from_config(const TomlConfig& cfg) {
  FfpeProblem prob;
  const auto dom = cfg.get_double_array("ffpe", "domain");
  if (dom.size() != 2) {
    throw ConfigError("ffpe: domain must be [a, b]");
  }
  prob.a = dom[0];
  prob.b = dom[1];
  prob.cells = static_cast<int>(cfg.get_int_or("ffpe", "cells", 256));
  prob.gamma = cfg.get_double_or("ffpe", "gamma", 1.0);
  prob.alpha = cfg.get_double_or("ffpe", "alpha", 1.0);
  prob.dt = cfg.get_double_or("ffpe", "dt", 1e-3);
  prob.time_stretch = cfg.get_double_or("ffpe", "time_stretch", 1.0);
  prob.drift_scale = cfg.get_double_or("ffpe", "drift_scale", 1.0);

  const std::string pot = cfg.get_string_or("ffpe", "potential", "double_well");
  const double scale = cfg.get_double_or("ffpe", "potential_scale", 1.0);
  if (pot == "double_well") {
    prob.potential = [scale](double x) {
      return scale * (x * x - 1.0) * (x * x - 1.0);
    };
  } else if (pot == "quadratic") {
    prob.potential = [scale](double x) { return 0.5 * scale * x * x; };
  } else if (pot == "flat") {
    prob.potential = [](double) { return 0.0; };
  } else {
    throw ConfigError("ffpe: unknown potential '" + pot + "'");
  }
  prob.diffusion.assign(static_cast<size_t>(prob.cells),
                        cfg.get_double_or("ffpe", "diffusion", 1.0));
  return prob;
}

void write_density_csv(const FfpeProblem& prob, std::span<const double> p,
                       const std::string& path) {
  std::ofstream f(path);
  f << "x,p\n";
  for (int i = 0; i < prob.cells; ++i) {
    f << fmtd(prob.cell_center(i)) << ',' << fmtd(p[static_cast<size_t>(i)])
      << "\n";
  }
}

int cmd_train(const std::string& config, const std::string& out,
              int64_t seed_override, bool has_seed) {
  Experiment exp = load_experiment(config);
  if (has_seed) {
    exp.run.seed = static_cast<uint64_t>(seed_override);
  }
  const TrajectoryLog log = run_train_dir(exp, out);
  std::cout << "run " << log.run_id << " -> " << out << "/log.csv ("
            << log.rows() << " telemetry rows";
  if (log.failed) {
    std::cout << ", FAILED: " << log.fail_reason;
  }
  std::cout << ")\n";
  return log.failed ? kExitNumerics : 0;
}

int cmd_ensemble(const std::string& config, const std::string& out, int seeds,
                 int jobs) {
  const Experiment exp = load_experiment(config);
  const auto logs = run_ensemble_dir(exp, out, seeds, jobs);
  int failed = 0;
  for (const auto& l : logs) {
    if (l.failed) {
      failed++;
    }
  }
  std::cout << "ensemble of " << seeds << " runs -> " << out << " (" << failed
            << " failed)\n";
  return 0;
}

int cmd_analyze(const std::string& in, const std::string& out,
                double discard) {
  const EnsembleAnalysis ea = analyze_dir(in, out, discard);
  std::cout << "analyzed " << ea.runs.size() << " run(s) -> " << out
            << "/report.json\n";
  for (const RunAnalysis& ra : ea.runs) {
    std::cout << "  " << ra.run_id << ": slope " << ra.report.fit.slope
              << " (R^2 " << ra.report.fit.r_squared << ")";
    if (ra.has_llc) {
      std::cout << ", lambda_final " << ra.summary.final_llc << ", d_s "
                << ra.report.d_s;
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_llc(const std::string& config, const std::string& checkpoint,
            const std::string& out) {
  const Experiment exp = load_experiment(config);
  auto [train, test] = build_datasets(exp);
  const Checkpoint ck = read_checkpoint(checkpoint);
  SgldConfig sg = exp.run.sgld;
  if (sg.minibatch == 0) {
    sg.minibatch = exp.run.opt.batch_size;
  }
  sg.seed = derive_seed(ck.root_seed,
                        {0x6c6c6373ULL, static_cast<uint64_t>(ck.step)});
  const LlcEstimate est = estimate_llc(ck.params, train, exp.run.arch, sg);

  nlohmann::json j;
  j["step"] = ck.step;
  j["lambda_hat"] = est.lambda_hat;
  j["std_err"] = est.std_err;
  j["chains_used"] = est.chains_used;
  j["negative_flag"] = est.negative_flag;
  j["center_loss"] = est.center_loss;
  j["wbic"] = wbic(est.center_loss, est.lambda_hat, train.size());
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f((fs::path(out) / "llc.json").string());
    f << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_ffpe(const std::string& config, const std::string& out) {
  const TomlConfig cfg = TomlConfig::parse_file(config);
  const FfpeProblem prob = ffpe_from_config(cfg);
  const int steps = static_cast<int>(cfg.get_int_or("ffpe", "steps", 1000));
  const int snapshots = static_cast<int>(cfg.get_int_or("ffpe", "snapshots", 4));

  FfpeState st;
  const std::string init = cfg.get_string_or("ffpe", "initial", "uniform");
  if (init == "uniform") {
    st = make_uniform_state(prob);
  } else if (init == "gaussian") {
    st = make_gaussian_state(prob, cfg.get_double_or("ffpe", "init_mean", 0.0),
                             cfg.get_double_or("ffpe", "init_sd", 0.3));
  } else {
    throw ConfigError("ffpe: unknown initial condition '" + init + "'");
  }

  fs::create_directories(out);
  const int snap_every = std::max(1, steps / std::max(1, snapshots));
  for (int s = 1; s <= steps; ++s) {
    ffpe_step(st, prob);
    if (s % snap_every == 0 || s == steps) {
      char name[64];
      std::snprintf(name, sizeof(name), "density_%06d.csv", s);
      write_density_csv(prob, st.p, (fs::path(out) / name).string());
    }
  }

  nlohmann::json j;
  j["t_final"] = st.t;
  j["steps"] = steps;
  j["mass_drift_max"] = st.max_mass_drift;
  j["clipped_cells"] = st.clipped_cells;
  const auto [dmin, dmax] =
      std::minmax_element(prob.diffusion.begin(), prob.diffusion.end());
  if (*dmax / *dmin <= 1.05) {
    const auto ps = boltzmann_stationary(prob);
    write_density_csv(prob, ps, (fs::path(out) / "stationary.csv").string());
    j["l1_to_stationary"] = l1_distance(st.p, ps, prob.dx());
  }
  std::ofstream f((fs::path(out) / "ffpe_summary.json").string());
  f << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_bench(const std::string& config, const std::string& out, int jobs) {
  const TomlConfig cfg = TomlConfig::parse_file(config);
  const std::string graph = cfg.get_string_or("bench", "graph", "gasket");
  FractalGraph g;
  if (graph == "gasket") {
    g = build_gasket(static_cast<int>(cfg.get_int_or("bench", "level", 7)));
  } else if (graph == "chain") {
    g = build_chain(static_cast<int>(cfg.get_int_or("bench", "length", 4001)));
  } else if (graph == "lattice") {
    g = build_lattice(static_cast<int>(cfg.get_int_or("bench", "side", 401)));
  } else {
    throw ConfigError("bench: unknown graph '" + graph + "'");
  }
  const int steps = static_cast<int>(cfg.get_int_or("bench", "steps", 8192));
  const int walkers = static_cast<int>(cfg.get_int_or("bench", "walkers", 20000));
  const uint64_t seed = static_cast<uint64_t>(cfg.get_int_or("bench", "seed", 1));

  const WalkEnsemble we = simulate_walks(g, steps, walkers, seed, jobs);
  fs::create_directories(out);
  {
    std::ofstream f((fs::path(out) / "walks.csv").string());
    f << "t,msd,return_prob\n";
    for (int t = 0; t <= steps; ++t) {
      f << t << ',' << fmtd(we.msd[static_cast<size_t>(t)]) << ','
        << fmtd(we.return_prob[static_cast<size_t>(t)]) << "\n";
    }
  }
  nlohmann::json j;
  j["graph"] = graph;
  j["vertices"] = g.vertex_count();
  j["edges"] = g.edge_count();
  const double wlo = cfg.get_double_or("bench", "window_min", 16.0);
  const double whi = cfg.get_double_or("bench", "window_max", steps / 4.0);
  try {
    const DimensionFit ds = spectral_from_return(we, FitWindow{wlo, whi});
    j["d_s"] = ds.value;
    j["d_s_r_squared"] = ds.fit.r_squared;
  } catch (const std::exception& e) {
    j["d_s_error"] = e.what();
  }
  try {
    const DimensionFit dw =
        walker_dimension(we, FitWindow{wlo, static_cast<double>(steps)});
    j["d_walk"] = dw.value;
    j["subdiffusive"] = dw.value > 2.05;
  } catch (const std::exception& e) {
    j["d_walk_error"] = e.what();
  }
  const double rmax = cfg.get_double_or("bench", "radius_max", 64.0);
  std::vector<double> radii;
  for (double r = 2.0; r <= rmax * 1.0001; r *= std::pow(2.0, 0.5)) {
    radii.push_back(r);
  }
  try {
    const DimensionFit df = mass_dimension(g, radii);
    j["d_f"] = df.value;
  } catch (const std::exception& e) {
    j["d_f_error"] = e.what();
  }
  std::ofstream f((fs::path(out) / "bench_verdict.json").string());
  f << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_validate(const ValidationOptions& opts) {
  const auto results = run_validation(opts);
  if (results.empty()) {
    std::cerr << "validate: no checks matched group '" << opts.only_group
              << "'\n";
    return kExitConfig;
  }
  size_t fails = 0;
  std::printf("%-10s %-45s %-6s %12s  %s\n", "group", "claim", "status",
              "margin", "detail");
  for (const CheckResult& r : results) {
    if (!r.passed) {
      fails++;
    }
    std::printf("%-10s %-45s %-6s %12.4g  %s\n", r.group.c_str(),
                r.name.c_str(), r.passed ? "PASS" : "FAIL", r.margin,
                r.detail.c_str());
  }
  std::printf("%zu/%zu checks passed\n", results.size() - fails, results.size());
  return fails == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fraclab: SGD diffusion telemetry, LLC estimation, and "
               "fractal-dimension analysis"};
  app.require_subcommand(1);

  std::string config, out = "out", in, checkpoint;
  int seeds = 1, jobs = 1;
  int64_t seed_override = 0;
  double discard = 0.2;

  auto* train = app.add_subcommand("train", "single training run");
  train->add_option("--config", config)->required();
  train->add_option("--out", out);
  auto* seed_opt = train->add_option("--seed", seed_override);

  auto* ens = app.add_subcommand("ensemble", "seed ensemble of runs");
  ens->add_option("--config", config)->required();
  ens->add_option("--out", out);
  ens->add_option("--seeds", seeds);
  ens->add_option("--jobs", jobs);

  auto* ana = app.add_subcommand("analyze", "fit/report a run or ensemble dir");
  ana->add_option("--in", in)->required();
  ana->add_option("--out", out);
  ana->add_option("--discard", discard);

  auto* llc = app.add_subcommand("llc", "estimate the LLC at a checkpoint");
  llc->add_option("--config", config)->required();
  llc->add_option("--checkpoint", checkpoint)->required();
  llc->add_option("--out", out);

  auto* ffpe = app.add_subcommand("ffpe", "solve a fractional FPE problem");
  ffpe->add_option("--config", config)->required();
  ffpe->add_option("--out", out);

  auto* bench = app.add_subcommand("bench", "random-walk dimension benchmarks");
  bench->add_option("--config", config)->required();
  bench->add_option("--out", out);
  bench->add_option("--jobs", jobs);

  ValidationOptions vopts;
  auto* val = app.add_subcommand("validate", "run the oracle suite");
  val->add_option("--only", vopts.only_group);
  val->add_option("--jobs", vopts.jobs);
  val->add_option("--gasket-level", vopts.gasket_level);
  val->add_option("--walkers", vopts.gasket_walkers);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(config, out, seed_override, seed_opt->count() > 0);
    }
    if (ens->parsed()) {
      return cmd_ensemble(config, out, seeds, jobs);
    }
    if (ana->parsed()) {
      return cmd_analyze(in, out, discard);
    }
    if (llc->parsed()) {
      return cmd_llc(config, checkpoint, out);
    }
    if (ffpe->parsed()) {
      return cmd_ffpe(config, out);
    }
    if (bench->parsed()) {
      return cmd_bench(config, out, jobs);
    }
    if (val->parsed()) {
      return cmd_validate(vopts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericsError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerics;
  } catch (const TelemetryError& e) {
    std::cerr << "telemetry error: " << e.what() << "\n";
    return kExitTelemetry;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
