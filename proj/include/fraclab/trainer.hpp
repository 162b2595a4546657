#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fraclab/data.hpp"
#include "fraclab/llc.hpp"
#include "fraclab/nn.hpp"

namespace fraclab {

struct RunConfig {
  Architecture arch;
  OptimizerConfig opt;
  int epochs = 1;
  uint64_t seed = 0;
  int telemetry_every = 100;
  int checkpoint_every = 0;  // 0 = off
  int llc_every = 100;       // 0 = off; must be a multiple of telemetry_every
  SgldConfig sgld;
  double heavy_tail_kurtosis_threshold = 50.0;

  void validate() const;
};

// One row per telemetry point; series always share length and start at the
// t=0 row with zero displacement.
struct TrajectoryLog {
  std::vector<int64_t> steps;
  std::vector<double> displacement;  // ||w_t - w_0||
  std::vector<double> increment;     // ||w_t - w_prev_telemetry||
  std::vector<std::vector<double>> per_layer;  // [row][layer]
  std::vector<double> train_loss;
  std::vector<double> gen_error;
  std::vector<double> llc;          // NaN where not estimated
  std::vector<double> llc_std_err;  // NaN likewise
  std::vector<uint8_t> llc_negative;

  std::string run_id;       // content hash of (config, seed)
  std::string config_hash;  // content hash of the config alone
  bool failed = false;
  std::string fail_reason;
  double increment_excess_kurtosis = std::numeric_limits<double>::quiet_NaN();
  bool heavy_tail_flag = false;

  size_t rows() const { return steps.size(); }
};

// Everything needed to continue a run bitwise: randomness is counter-derived
// from the root seed, so (seed, step) fully determines the RNG state.
struct Checkpoint {
  int64_t step = 0;
  ParamVector params;
  OptimizerState opt_state;
  uint64_t root_seed = 0;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

TrajectoryLog train_run(const RunConfig& cfg, const Dataset& train,
                        const Dataset& test,
                        const CheckpointSink& sink = nullptr);

// Continues from a checkpoint; the emitted rows equal the tail of the
// uninterrupted run bitwise.
TrajectoryLog resume_run(const RunConfig& cfg, const Dataset& train,
                         const Dataset& test, const Checkpoint& from,
                         const CheckpointSink& sink = nullptr);

double generalization_error(const ParamVector& params, const Dataset& test,
                            const Architecture& arch);

struct RunSummary {
  double final_llc = std::numeric_limits<double>::quiet_NaN();
  double final_gen_error = std::numeric_limits<double>::quiet_NaN();
  int points_averaged = 0;
  bool short_series_warning = false;
};

// Trailing-10 averages of the LLC and generalization-error series.
RunSummary finalize(const TrajectoryLog& log);

// Independent runs; execution order never changes the result. Per-run
// failures are isolated into the failed flag of that log.
std::vector<TrajectoryLog> ensemble(const std::vector<RunConfig>& cfgs,
                                    const Dataset& train, const Dataset& test,
                                    int jobs = 1);

}  // namespace fraclab
