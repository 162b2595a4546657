#include "fraclab/runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace fraclab {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string resolve_data_path(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) {
    return p;
  }
  if (const char* base = std::getenv("FRACLAB_DATA_DIR")) {
    const fs::path candidate = fs::path(base) / p;
    if (fs::exists(candidate)) {
      return candidate.string();
    }
  }
  return p;
}

double finite_or(double v, double dflt) {
  return std::isfinite(v) ? v : dflt;
}

}  // namespace

Experiment parse_experiment(const TomlConfig& cfg) {
  Experiment e;
  e.config_text = cfg.raw_text();

  const int64_t schema = cfg.get_int_or("", "schema_version", 1);
  if (schema != 1) {
    throw ConfigError("unsupported schema_version " + std::to_string(schema));
  }

  e.run.seed = static_cast<uint64_t>(cfg.get_int_or("run", "seed", 0));
  e.run.epochs = static_cast<int>(cfg.get_int_or("run", "epochs", 1));

  for (int64_t w : cfg.get_int_array("arch", "widths")) {
    e.run.arch.layer_widths.push_back(static_cast<int>(w));
  }
  e.run.arch.use_batch_norm = cfg.get_bool_or("arch", "batch_norm", false);

  const std::string kind = cfg.get_string_or("opt", "kind", "sgd");
  if (kind == "sgd") {
    e.run.opt.kind = OptimizerKind::kSgd;
  } else if (kind == "adamw") {
    e.run.opt.kind = OptimizerKind::kAdamw;
  } else {
    throw ConfigError("unknown optimizer kind: " + kind);
  }
  e.run.opt.learning_rate = cfg.get_double_or("opt", "learning_rate", 0.001);
  e.run.opt.weight_decay = cfg.get_double_or("opt", "weight_decay", 0.0);
  e.run.opt.batch_size = static_cast<int>(cfg.get_int_or("opt", "batch_size", 256));
  e.run.opt.beta1 = cfg.get_double_or("opt", "beta1", 0.9);
  e.run.opt.beta2 = cfg.get_double_or("opt", "beta2", 0.999);
  e.run.opt.epsilon = cfg.get_double_or("opt", "epsilon", 1e-8);

  e.run.telemetry_every =
      static_cast<int>(cfg.get_int_or("telemetry", "every", 100));
  e.run.llc_every = static_cast<int>(cfg.get_int_or("telemetry", "llc_every", 0));
  e.run.checkpoint_every =
      static_cast<int>(cfg.get_int_or("telemetry", "checkpoint_every", 0));
  e.run.heavy_tail_kurtosis_threshold =
      cfg.get_double_or("telemetry", "heavy_tail_threshold", 50.0);

  e.run.sgld.step_size = cfg.get_double_or("sgld", "step_size", 1e-4);
  e.run.sgld.gamma_loc = cfg.get_double_or("sgld", "gamma_loc", 100.0);
  e.run.sgld.chains = static_cast<int>(cfg.get_int_or("sgld", "chains", 4));
  e.run.sgld.draws = static_cast<int>(cfg.get_int_or("sgld", "draws", 200));
  e.run.sgld.burn_in = static_cast<int>(cfg.get_int_or("sgld", "burn_in", 90));
  e.run.sgld.minibatch =
      static_cast<int>(cfg.get_int_or("sgld", "minibatch", 0));

  e.data_kind = cfg.get_string_or("data", "kind", "blobs");
  if (e.data_kind == "blobs") {
    e.blob_classes = static_cast<int>(cfg.get_int_or("data", "classes", 2));
    e.blob_dim = static_cast<int>(cfg.get_int_or("data", "dim", 2));
    e.blob_per_class = static_cast<int>(cfg.get_int_or("data", "per_class", 100));
    e.blob_sigma = cfg.get_double_or("data", "sigma", 0.25);
    e.label_noise = cfg.get_double_or("data", "label_noise", 0.0);
  } else if (e.data_kind == "idx") {
    e.idx_images = cfg.get_string("data", "images");
    e.idx_labels = cfg.get_string("data", "labels");
    e.idx_standardize = cfg.get_bool_or("data", "standardize", false);
  } else {
    throw ConfigError("unknown data kind: " + e.data_kind);
  }
  e.data_seed = static_cast<uint64_t>(cfg.get_int_or("data", "seed", 12345));
  e.train_fraction = cfg.get_double_or("data", "train_fraction", 0.5);
  if (cfg.has("data", "subset_size")) {
    e.subset_size = static_cast<int>(cfg.get_int("data", "subset_size"));
  }
  e.balanced = cfg.get_bool_or("data", "balanced", true);

  e.discard_fraction = cfg.get_double_or("analysis", "discard_fraction", 0.2);

  e.run.validate();
  return e;
}

Experiment load_experiment(const std::string& config_path) {
  return parse_experiment(TomlConfig::parse_file(config_path));
}

std::pair<Dataset, Dataset> build_datasets(const Experiment& exp) {
  Dataset full;
  if (exp.data_kind == "blobs") {
    full = synth_blobs(exp.blob_classes, exp.blob_dim, exp.blob_per_class,
                       exp.blob_sigma, exp.data_seed);
  } else {
    IdxOptions opts;
    opts.standardize = exp.idx_standardize;
    full = load_idx(resolve_data_path(exp.idx_images),
                    resolve_data_path(exp.idx_labels), opts);
  }
  SplitSpec spec;
  spec.train_fraction = exp.train_fraction;
  spec.seed = exp.data_seed;
  spec.subset_size = exp.subset_size;
  spec.balanced = exp.balanced;
  auto [train, test] = split(full, spec);
  if (exp.label_noise > 0.0) {
    corrupt_labels(train, exp.label_noise, exp.data_seed + 1);
  }
  return {std::move(train), std::move(test)};
}

TrajectoryLog run_train_dir(const Experiment& exp, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto [train, test] = build_datasets(exp);

  std::vector<std::string> artifacts = {"log.csv"};
  CheckpointSink sink;
  if (exp.run.checkpoint_every > 0) {
    sink = [&](const Checkpoint& ck) {
      const std::string name = "checkpoint_" + std::to_string(ck.step) + ".bin";
      write_checkpoint(ck, (fs::path(out_dir) / name).string());
      artifacts.push_back(name);
    };
  }

  TrajectoryLog log = train_run(exp.run, train, test, sink);
  log.run_id = run_id_for(exp.config_text, exp.run.seed);
  log.config_hash = content_hash(exp.config_text);
  write_trajectory_csv(log, (fs::path(out_dir) / "log.csv").string());

  Manifest m;
  m.run_id = log.run_id;
  m.config_hash = log.config_hash;
  m.seed = exp.run.seed;
  m.config_text = exp.config_text;
  m.artifacts = artifacts;
  write_manifest(m, (fs::path(out_dir) / "manifest.json").string());
  return log;
}

std::vector<TrajectoryLog> run_ensemble_dir(const Experiment& exp,
                                            const std::string& out_dir,
                                            int n_seeds, int jobs) {
  if (n_seeds < 1) {
    throw ConfigError("ensemble: n_seeds must be >= 1");
  }
  fs::create_directories(out_dir);
  auto [train, test] = build_datasets(exp);

  std::vector<RunConfig> cfgs;
  cfgs.reserve(static_cast<size_t>(n_seeds));
  for (int i = 0; i < n_seeds; ++i) {
    RunConfig c = exp.run;
    c.seed = exp.run.seed + static_cast<uint64_t>(i);
    c.checkpoint_every = 0;  // ensembles do not keep checkpoints
    cfgs.push_back(c);
  }
  std::vector<TrajectoryLog> logs = ensemble(cfgs, train, test, jobs);

  nlohmann::json index;
  index["runs"] = nlohmann::json::array();
  index["failed_runs"] = nlohmann::json::array();
  for (int i = 0; i < n_seeds; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03d", i);
    const std::string rd = (fs::path(out_dir) / name).string();
    fs::create_directories(rd);
    TrajectoryLog& log = logs[static_cast<size_t>(i)];
    log.run_id = run_id_for(exp.config_text, cfgs[static_cast<size_t>(i)].seed);
    log.config_hash = content_hash(exp.config_text);
    write_trajectory_csv(log, (fs::path(rd) / "log.csv").string());
    Manifest m;
    m.run_id = log.run_id;
    m.config_hash = log.config_hash;
    m.seed = cfgs[static_cast<size_t>(i)].seed;
    m.config_text = exp.config_text;
    m.artifacts = {"log.csv"};
    write_manifest(m, (fs::path(rd) / "manifest.json").string());
    index["runs"].push_back(name);
    if (log.failed) {
      index["failed_runs"].push_back(
          {{"run", name}, {"reason", log.fail_reason}});
    }
  }
  index["config"] = exp.config_text;
  index["base_seed"] = exp.run.seed;
  std::ofstream f((fs::path(out_dir) / "index.json").string());
  f << index.dump(2) << "\n";
  return logs;
}

RunAnalysis analyze_log(const TrajectoryLog& log, double discard_fraction) {
  RunAnalysis ra;
  ra.run_id = log.run_id;
  ra.heavy_tail_flag = log.heavy_tail_flag;
  ra.increment_excess_kurtosis = finite_or(log.increment_excess_kurtosis, 0.0);
  if (log.rows() < 4) {
    throw TelemetryError("analyze: log has fewer than 4 telemetry rows");
  }

  std::vector<double> t(log.steps.begin(), log.steps.end());
  const FitWindow window = tail_window(t, discard_fraction);
  const PowerLawFit fit = fit_power_law(t, log.displacement, window);

  ra.summary = finalize(log);
  ra.has_llc = std::isfinite(ra.summary.final_llc);

  if (ra.has_llc && ra.summary.final_llc > 0.0 && fit.slope > 0.0) {
    const double d_s = spectral_dimension(fit, ra.summary.final_llc);
    ra.report = check_inequalities(log.llc, d_s, fit, discard_fraction);
  } else {
    ra.report.fit = fit;
    ra.report.nu = fit.slope != 0.0 ? 1.0 / fit.slope
                                    : std::numeric_limits<double>::infinity();
    ra.report.subdiffusive = fit.slope <= 0.5;
    ra.report.diffusive_boundary = fit.slope >= 0.5;
    ra.report.valid = false;
  }
  return ra;
}

EnsembleAnalysis analyze_many(const std::vector<TrajectoryLog>& logs,
                              double discard_fraction) {
  EnsembleAnalysis ea;
  for (const TrajectoryLog& log : logs) {
    if (log.failed) {
      continue;
    }
    ea.runs.push_back(analyze_log(log, discard_fraction));
  }
  if (ea.runs.empty()) {
    throw TelemetryError("analyze: no successful runs");
  }

  std::vector<DimensionReport> reports;
  std::vector<double> llc_finals, gen_finals;
  int holds = 0, valid = 0;
  for (const RunAnalysis& ra : ea.runs) {
    reports.push_back(ra.report);
    if (ra.report.valid) {
      valid++;
      if (ra.report.spectral_bound_holds && ra.report.averaged_bound_holds) {
        holds++;
      }
    }
    if (ra.has_llc && std::isfinite(ra.summary.final_gen_error)) {
      llc_finals.push_back(ra.summary.final_llc);
      gen_finals.push_back(ra.summary.final_gen_error);
    }
  }
  ea.inequality_fraction =
      valid > 0 ? static_cast<double>(holds) / valid : 0.0;

  if (ea.runs.size() >= 2) {
    std::vector<DimensionReport> with_nu;
    for (const auto& r : reports) {
      if (std::isfinite(r.nu) && r.nu != 0.0) {
        with_nu.push_back(r);
      }
    }
    if (with_nu.size() >= 2) {
      const size_t bins = std::max<size_t>(2, with_nu.size() / 4);
      // the histogram only needs nu; invalid-lambda runs still carry a fit
      for (auto& r : with_nu) {
        r.valid = true;
      }
      ea.exponents = diffusion_exponent_histogram(with_nu, bins);
      ea.has_histogram = true;
    }
  }
  if (llc_finals.size() >= 5) {
    try {
      ea.llc_gen = llc_vs_generalization(llc_finals, gen_finals);
      ea.has_llc_gen_fit = true;
    } catch (const std::exception&) {
      ea.has_llc_gen_fit = false;  // degenerate variance
    }
  }
  return ea;
}

namespace {

void write_plot_csvs(const std::vector<TrajectoryLog>& logs,
                     const EnsembleAnalysis& ea, const std::string& out_dir) {
  {
    std::ofstream f((fs::path(out_dir) / "loglog_displacement.csv").string());
    f << "run_id,step,displacement\n";
    for (const TrajectoryLog& log : logs) {
      for (size_t i = 0; i < log.rows(); ++i) {
        if (log.steps[i] > 0 && log.displacement[i] > 0.0) {
          f << log.run_id << ',' << log.steps[i] << ','
            << fmt_double(log.displacement[i]) << "\n";
        }
      }
    }
  }
  if (ea.has_histogram) {
    std::ofstream f((fs::path(out_dir) / "exponent_histogram.csv").string());
    f << "bin_lo,bin_hi,count\n";
    const Histogram& h = ea.exponents.hist;
    for (size_t b = 0; b < h.counts.size(); ++b) {
      f << fmt_double(h.edges[b]) << ',' << fmt_double(h.edges[b + 1]) << ','
        << h.counts[b] << "\n";
    }
  }
  {
    std::ofstream f((fs::path(out_dir) / "llc_vs_gen.csv").string());
    f << "run_id,final_llc,final_gen_error\n";
    for (const RunAnalysis& ra : ea.runs) {
      if (ra.has_llc) {
        f << ra.run_id << ',' << fmt_double(ra.summary.final_llc) << ','
          << fmt_double(ra.summary.final_gen_error) << "\n";
      }
    }
  }
}

}  // namespace

EnsembleAnalysis analyze_dir(const std::string& in_dir,
                             const std::string& out_dir,
                             double discard_fraction) {
  std::vector<TrajectoryLog> logs;
  const fs::path in(in_dir);
  if (fs::exists(in / "index.json")) {
    nlohmann::json index;
    std::ifstream f((in / "index.json").string());
    f >> index;
    for (const auto& name : index.at("runs")) {
      const fs::path rd = in / name.get<std::string>();
      TrajectoryLog log = read_trajectory_csv((rd / "log.csv").string());
      log.run_id = read_manifest((rd / "manifest.json").string()).run_id;
      logs.push_back(std::move(log));
    }
  } else if (fs::exists(in / "log.csv")) {
    TrajectoryLog log = read_trajectory_csv((in / "log.csv").string());
    if (fs::exists(in / "manifest.json")) {
      log.run_id = read_manifest((in / "manifest.json").string()).run_id;
    }
    logs.push_back(std::move(log));
  } else {
    throw DataError("analyze: no log.csv or index.json under " + in_dir);
  }

  EnsembleAnalysis ea = analyze_many(logs, discard_fraction);
  fs::create_directories(out_dir);
  std::ofstream f((fs::path(out_dir) / "report.json").string());
  f << analysis_to_json(ea).dump(2) << "\n";
  write_plot_csvs(logs, ea, out_dir);
  return ea;
}

nlohmann::json analysis_to_json(const EnsembleAnalysis& ea) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["runs"] = nlohmann::json::array();
  for (const RunAnalysis& ra : ea.runs) {
    nlohmann::json r;
    r["run_id"] = ra.run_id;
    r["slope"] = ra.report.fit.slope;
    r["intercept"] = ra.report.fit.intercept;
    r["r_squared"] = ra.report.fit.r_squared;
    r["t_min"] = ra.report.fit.t_min;
    r["t_max"] = ra.report.fit.t_max;
    r["points_used"] = static_cast<int64_t>(ra.report.fit.points_used);
    r["nu"] = finite_or(ra.report.nu, -1.0);
    r["subdiffusive"] = ra.report.subdiffusive;
    r["valid"] = ra.report.valid;
    r["d_s"] = finite_or(ra.report.d_s, -1.0);
    r["d_walk"] = finite_or(ra.report.d_walk, -1.0);
    r["lambda_final"] = finite_or(ra.report.lambda_final, -1.0);
    r["lambda_bar"] = finite_or(ra.report.lambda_bar, -1.0);
    r["spectral_bound_holds"] = ra.report.spectral_bound_holds;
    r["averaged_bound_holds"] = ra.report.averaged_bound_holds;
    r["margin"] = finite_or(ra.report.margin, 0.0);
    r["final_llc"] = finite_or(ra.summary.final_llc, -1.0);
    r["final_gen_error"] = finite_or(ra.summary.final_gen_error, -1.0);
    r["heavy_tail_flag"] = ra.heavy_tail_flag;
    r["increment_excess_kurtosis"] = ra.increment_excess_kurtosis;
    j["runs"].push_back(r);
  }
  nlohmann::json ens;
  ens["inequality_fraction"] = ea.inequality_fraction;
  if (ea.has_histogram) {
    ens["exponent_median"] = ea.exponents.median;
    ens["exponent_skew"] = ea.exponents.skew;
    ens["concentration_verdict"] = ea.exponents.concentration_verdict;
    nlohmann::json h;
    h["edges"] = ea.exponents.hist.edges;
    h["counts"] = ea.exponents.hist.counts;
    ens["histogram"] = h;
  }
  if (ea.has_llc_gen_fit) {
    nlohmann::json g;
    g["slope"] = ea.llc_gen.fit.slope;
    g["intercept"] = ea.llc_gen.fit.intercept;
    g["pearson"] = ea.llc_gen.pearson;
    g["points"] = static_cast<int64_t>(ea.llc_gen.points);
    ens["llc_gen"] = g;
  }
  j["ensemble"] = ens;
  return j;
}

nlohmann::json report_schema() {
  return nlohmann::json::parse(R"({
    "type": "object",
    "required": ["schema_version", "runs", "ensemble"],
    "properties": {
      "schema_version": {"type": "integer"},
      "runs": {
        "type": "array",
        "items": {
          "type": "object",
          "required": ["run_id", "slope", "r_squared", "nu", "subdiffusive",
                       "valid", "spectral_bound_holds", "averaged_bound_holds"],
          "properties": {
            "run_id": {"type": "string"},
            "slope": {"type": "number"},
            "intercept": {"type": "number"},
            "r_squared": {"type": "number"},
            "nu": {"type": "number"},
            "d_s": {"type": "number"},
            "d_walk": {"type": "number"},
            "lambda_final": {"type": "number"},
            "lambda_bar": {"type": "number"},
            "margin": {"type": "number"},
            "subdiffusive": {"type": "boolean"},
            "valid": {"type": "boolean"},
            "spectral_bound_holds": {"type": "boolean"},
            "averaged_bound_holds": {"type": "boolean"},
            "final_llc": {"type": "number"},
            "final_gen_error": {"type": "number"},
            "heavy_tail_flag": {"type": "boolean"}
          }
        }
      },
      "ensemble": {
        "type": "object",
        "required": ["inequality_fraction"],
        "properties": {
          "inequality_fraction": {"type": "number"},
          "exponent_median": {"type": "number"},
          "concentration_verdict": {"type": "boolean"}
        }
      }
    }
  })");
}

}  // namespace fraclab
