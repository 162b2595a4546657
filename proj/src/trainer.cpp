#include "fraclab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>

#include "fraclab/rng.hpp"
#include "fraclab/stats.hpp"

namespace fraclab {

namespace {

constexpr uint64_t kEpochStream = 0x65706f63ULL;
constexpr uint64_t kLlcStream = 0x6c6c6373ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int steps_per_epoch(const Dataset& train, int batch_size) {
  return static_cast<int>(
      (train.size() + static_cast<int64_t>(batch_size) - 1) / batch_size);
}

struct LoopState {
  ParamVector params;
  ParamVector w0;
  OptimizerState opt_state;
  int64_t step = 0;
  ParamVector prev_telemetry_params;
  std::vector<double> increments;  // per-step ||dw||, for the tail guard
};

void record_row(TrajectoryLog& log, const RunConfig& cfg, LoopState& st,
                const Dataset& train, const Dataset& test) {
  log.steps.push_back(st.step);
  log.displacement.push_back(displacement(st.params, st.w0));
  log.increment.push_back(displacement(st.params, st.prev_telemetry_params));
  log.per_layer.push_back(per_layer_displacement(st.params, st.w0));
  log.train_loss.push_back(loss_only(st.params, train.as_batch(), cfg.arch));
  log.gen_error.push_back(generalization_error(st.params, test, cfg.arch));

  const bool want_llc = cfg.llc_every > 0 && st.step > 0 &&
                        st.step % cfg.llc_every == 0;
  if (want_llc) {
    SgldConfig sg = cfg.sgld;
    if (sg.minibatch == 0) {
      sg.minibatch = cfg.opt.batch_size;
    }
    sg.seed = derive_seed(cfg.seed, {kLlcStream, static_cast<uint64_t>(st.step)});
    const LlcEstimate est = estimate_llc(st.params, train, cfg.arch, sg);
    log.llc.push_back(est.lambda_hat);
    log.llc_std_err.push_back(est.std_err);
    log.llc_negative.push_back(est.negative_flag ? 1 : 0);
  } else {
    log.llc.push_back(kNaN);
    log.llc_std_err.push_back(kNaN);
    log.llc_negative.push_back(0);
  }
  st.prev_telemetry_params = st.params;
}

void finish_log(TrajectoryLog& log, const RunConfig& cfg, LoopState& st) {
  if (st.increments.size() >= 4) {
    log.increment_excess_kurtosis = excess_kurtosis(st.increments);
    log.heavy_tail_flag =
        log.increment_excess_kurtosis > cfg.heavy_tail_kurtosis_threshold;
  }
}

// Runs the optimizer from the given state to the configured end of training.
// Both train_run and resume_run funnel through here, which is what makes
// checkpoint resume bitwise exact.
TrajectoryLog run_loop(const RunConfig& cfg, const Dataset& train,
                       const Dataset& test, LoopState st,
                       const CheckpointSink& sink, bool emit_initial_row) {
  TrajectoryLog log;
  const int spe = steps_per_epoch(train, cfg.opt.batch_size);
  const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * spe;

  if (emit_initial_row) {
    record_row(log, cfg, st, train, test);
  }

  std::vector<double> fbuf;
  std::vector<int32_t> lbuf;
  try {
    while (st.step < total_steps) {
      const int epoch = static_cast<int>(st.step / spe);
      const uint64_t epoch_seed =
          derive_seed(cfg.seed, {kEpochStream, static_cast<uint64_t>(epoch)});
      const auto epoch_batches = batches(train, cfg.opt.batch_size, epoch_seed);
      int b = static_cast<int>(st.step % spe);
      for (; b < static_cast<int>(epoch_batches.size()) && st.step < total_steps;
           ++b) {
        const Batch batch =
            train.row_batch(epoch_batches[static_cast<size_t>(b)], fbuf, lbuf);
        const ParamVector before = st.params;
        const LossGrad lg = loss_and_grad(st.params, batch, cfg.arch);
        optimizer_step(st.params, lg.grad, cfg.opt, st.opt_state);
        st.step += 1;
        st.increments.push_back(displacement(st.params, before));

        if (st.step % cfg.telemetry_every == 0) {
          record_row(log, cfg, st, train, test);
        }
        if (sink && cfg.checkpoint_every > 0 &&
            st.step % cfg.checkpoint_every == 0) {
          sink(Checkpoint{st.step, st.params, st.opt_state, cfg.seed});
        }
      }
    }
  } catch (const NumericsError& e) {
    log.failed = true;
    log.fail_reason = e.what();
  }
  finish_log(log, cfg, st);
  return log;
}

}  // namespace

void RunConfig::validate() const {
  arch.validate();
  opt.validate();
  if (epochs < 0) {
    throw ConfigError("epochs must be nonnegative");
  }
  if (telemetry_every < 1) {
    throw ConfigError("telemetry_every must be >= 1");
  }
  if (llc_every < 0 ||
      (llc_every > 0 && llc_every % telemetry_every != 0)) {
    throw ConfigError("llc_every must be 0 or a multiple of telemetry_every");
  }
  if (checkpoint_every < 0) {
    throw ConfigError("checkpoint_every must be nonnegative");
  }
}

TrajectoryLog train_run(const RunConfig& cfg, const Dataset& train,
                        const Dataset& test, const CheckpointSink& sink) {
  cfg.validate();
  if (train.input_dim != cfg.arch.input_dim()) {
    throw DataError("train_run: dataset width does not match architecture");
  }
  LoopState st;
  st.params = init_params(cfg.arch, cfg.seed);
  st.w0 = st.params;
  st.prev_telemetry_params = st.params;
  st.step = 0;
  return run_loop(cfg, train, test, std::move(st), sink,
                  /*emit_initial_row=*/true);
}

TrajectoryLog resume_run(const RunConfig& cfg, const Dataset& train,
                         const Dataset& test, const Checkpoint& from,
                         const CheckpointSink& sink) {
  cfg.validate();
  if (from.root_seed != cfg.seed) {
    throw ConfigError("resume_run: checkpoint seed does not match config");
  }
  LoopState st;
  st.params = from.params;
  st.w0 = init_params(cfg.arch, cfg.seed);  // reference is reconstructible
  st.prev_telemetry_params = from.params;
  st.opt_state = from.opt_state;
  st.step = from.step;
  return run_loop(cfg, train, test, std::move(st), sink,
                  /*emit_initial_row=*/false);
}

double generalization_error(const ParamVector& params, const Dataset& test,
                            const Architecture& arch) {
  if (test.size() == 0) {
    throw DataError("generalization_error: empty test set");
  }
  std::vector<int32_t> pred;
  predict(params, test.as_batch(), arch, pred);
  int wrong = 0;
  for (int i = 0; i < test.size(); ++i) {
    if (pred[static_cast<size_t>(i)] != test.labels[static_cast<size_t>(i)]) {
      wrong++;
    }
  }
  return static_cast<double>(wrong) / test.size();
}

RunSummary finalize(const TrajectoryLog& log) {
  RunSummary s;
  auto trailing_mean = [](const std::vector<double>& v, bool skip_nan,
                          int want, int& used) {
    std::vector<double> tail;
    for (auto it = v.rbegin(); it != v.rend() && static_cast<int>(tail.size()) < want;
         ++it) {
      if (skip_nan && std::isnan(*it)) {
        continue;
      }
      tail.push_back(*it);
    }
    used = static_cast<int>(tail.size());
    if (tail.empty()) {
      return kNaN;
    }
    return mean(tail);
  };

  int used_gen = 0;
  int used_llc = 0;
  s.final_gen_error = trailing_mean(log.gen_error, false, 10, used_gen);
  s.final_llc = trailing_mean(log.llc, true, 10, used_llc);
  s.points_averaged = used_gen;
  s.short_series_warning = used_gen < 10 || (used_llc > 0 && used_llc < 10);
  return s;
}

std::vector<TrajectoryLog> ensemble(const std::vector<RunConfig>& cfgs,
                                    const Dataset& train, const Dataset& test,
                                    int jobs) {
  std::vector<TrajectoryLog> logs(cfgs.size());
  if (jobs < 1) {
    jobs = 1;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cfgs.size()) {
        return;
      }
      try {
        logs[i] = train_run(cfgs[i], train, test);
      } catch (const std::exception& e) {
        logs[i].failed = true;
        logs[i].fail_reason = e.what();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::future<void>> futs;
    futs.reserve(static_cast<size_t>(jobs));
    for (int j = 0; j < jobs; ++j) {
      futs.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : futs) {
      f.get();
    }
  }
  return logs;
}

}  // namespace fraclab
