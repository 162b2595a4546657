#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fraclab/analysis.hpp"
#include "fraclab/manifest.hpp"
#include "fraclab/tomlcfg.hpp"
#include "fraclab/trainer.hpp"

namespace fraclab {

// Experiment description parsed from a config file: how to build the data
// and how to run training on it.
struct Experiment {
  RunConfig run;
  // data
  std::string data_kind = "blobs";  // "blobs" | "idx"
  int blob_classes = 2;
  int blob_dim = 2;
  int blob_per_class = 100;
  double blob_sigma = 0.25;
  double label_noise = 0.0;
  uint64_t data_seed = 12345;
  std::string idx_images;
  std::string idx_labels;
  bool idx_standardize = false;
  double train_fraction = 0.5;
  std::optional<int> subset_size;
  bool balanced = true;
  // analysis
  double discard_fraction = 0.2;

  std::string config_text;  // raw config echo for manifests
};

Experiment parse_experiment(const TomlConfig& cfg);
Experiment load_experiment(const std::string& config_path);

// Builds (train, test) for the experiment. IDX paths resolve against
// FRACLAB_DATA_DIR when set and the path is relative.
std::pair<Dataset, Dataset> build_datasets(const Experiment& exp);

// Runs training, writes log.csv, manifest.json and checkpoints into out_dir.
// Returns the log.
TrajectoryLog run_train_dir(const Experiment& exp, const std::string& out_dir);

// n_seeds runs with seeds root, root+1, ...; writes run_XXX dirs plus an
// index manifest.
std::vector<TrajectoryLog> run_ensemble_dir(const Experiment& exp,
                                            const std::string& out_dir,
                                            int n_seeds, int jobs);

struct RunAnalysis {
  std::string run_id;
  DimensionReport report;
  RunSummary summary;
  bool has_llc = false;
  bool heavy_tail_flag = false;
  double increment_excess_kurtosis = 0.0;
};

RunAnalysis analyze_log(const TrajectoryLog& log, double discard_fraction);

struct EnsembleAnalysis {
  std::vector<RunAnalysis> runs;
  bool has_histogram = false;
  ExponentHistogram exponents;
  double inequality_fraction = 0.0;  // runs where both inequalities hold
  bool has_llc_gen_fit = false;
  LlcGenFit llc_gen;
};

EnsembleAnalysis analyze_many(const std::vector<TrajectoryLog>& logs,
                              double discard_fraction);

// Directory-level analyze: accepts a single run dir (manifest.json + log.csv)
// or an ensemble dir (index.json). Writes report.json and plot CSVs.
EnsembleAnalysis analyze_dir(const std::string& in_dir,
                             const std::string& out_dir,
                             double discard_fraction);

nlohmann::json analysis_to_json(const EnsembleAnalysis& a);

// Schema for report.json (shipped in-source so a checkout is self-contained).
nlohmann::json report_schema();

}  // namespace fraclab
