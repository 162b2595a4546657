#include "fraclab/llc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <numeric>

namespace fraclab {

namespace {
constexpr double kDivergedLoss = 1e6;
}

void SgldConfig::validate() const {
  if (step_size <= 0.0) {
    throw ConfigError("sgld: step_size must be positive");
  }
  if (gamma_loc <= 0.0) {
    throw ConfigError("sgld: gamma_loc must be positive");
  }
  if (chains < 1) {
    throw ConfigError("sgld: need at least one chain");
  }
  if (draws <= burn_in || burn_in < 0) {
    throw ConfigError("sgld: draws must exceed burn_in");
  }
}

NetworkLoss::NetworkLoss(const Architecture& arch, const Dataset& data,
                         int minibatch)
    : arch_(arch), data_(data), minibatch_(minibatch) {
  proto_ = init_params(arch_, 0);  // layout only; values are overwritten
}

size_t NetworkLoss::dim() const { return proto_.dim(); }

double NetworkLoss::full_loss(std::span<const double> w) const {
  ParamVector p = proto_;
  std::copy(w.begin(), w.end(), p.values.begin());
  return loss_only(p, data_.as_batch(), arch_);
}

double NetworkLoss::loss_grad(std::span<const double> w, Rng& rng,
                              std::span<double> grad_out) const {
  ParamVector p = proto_;
  std::copy(w.begin(), w.end(), p.values.begin());
  LossGrad lg;
  if (minibatch_ <= 0 || minibatch_ >= data_.size()) {
    lg = loss_and_grad(p, data_.as_batch(), arch_);
  } else {
    std::vector<int> rows(static_cast<size_t>(minibatch_));
    for (int& r : rows) {
      r = static_cast<int>(rng.below(static_cast<uint64_t>(data_.size())));
    }
    std::vector<double> fbuf;
    std::vector<int32_t> lbuf;
    const Batch b = data_.row_batch(rows, fbuf, lbuf);
    lg = loss_and_grad(p, b, arch_);
  }
  std::copy(lg.grad.values.begin(), lg.grad.values.end(), grad_out.begin());
  return lg.loss;
}

namespace {

struct ChainResult {
  double lambda = 0.0;
  bool diverged = false;
};

ChainResult run_chain(const SampledLoss& loss, std::span<const double> w_star,
                      const SgldConfig& cfg, double beta, double center_loss,
                      uint64_t chain_seed) {
  const size_t d = loss.dim();
  const double m = static_cast<double>(loss.data_size());
  Rng rng(chain_seed);
  std::vector<double> w(w_star.begin(), w_star.end());
  std::vector<double> grad(d, 0.0);
  const double eps = cfg.step_size;
  const double noise_sd = std::sqrt(eps);

  double loss_sum = 0.0;
  int kept = 0;
  ChainResult cr;
  for (int step = 0; step < cfg.draws; ++step) {
    double lb;
    try {
      lb = loss.loss_grad(w, rng, grad);
    } catch (const NumericsError&) {
      cr.diverged = true;
      return cr;
    }
    if (!std::isfinite(lb) || lb > kDivergedLoss) {
      cr.diverged = true;
      return cr;
    }
    if (step >= cfg.burn_in) {
      loss_sum += lb;
      kept++;
    }
    for (size_t i = 0; i < d; ++i) {
      const double drift =
          beta * m * grad[i] + cfg.gamma_loc * (w[i] - w_star[i]);
      w[i] += -0.5 * eps * drift + noise_sd * rng.normal();
    }
  }
  cr.lambda = m * beta * (loss_sum / kept - center_loss);
  return cr;
}

}  // namespace

LlcEstimate estimate_llc(const SampledLoss& loss, std::span<const double> w_star,
                         const SgldConfig& cfg) {
  cfg.validate();
  if (loss.data_size() < 3) {
    throw ConfigError("estimate_llc: data size must be >= 3 for beta = 1/log m");
  }
  for (double v : w_star) {
    if (!std::isfinite(v)) {
      throw NumericsError("estimate_llc: non-finite center point");
    }
  }
  const double m = static_cast<double>(loss.data_size());
  const double beta = 1.0 / std::log(m);
  const double center_loss = loss.full_loss(w_star);

  std::vector<std::future<ChainResult>> futs;
  futs.reserve(static_cast<size_t>(cfg.chains));
  for (int c = 0; c < cfg.chains; ++c) {
    const uint64_t cs = derive_seed(cfg.seed, {0x6c6c63ULL, static_cast<uint64_t>(c)});
    futs.push_back(std::async(std::launch::async, [&, cs] {
      return run_chain(loss, w_star, cfg, beta, center_loss, cs);
    }));
  }

  std::vector<double> lambdas;
  for (auto& f : futs) {
    const ChainResult cr = f.get();
    if (!cr.diverged) {
      lambdas.push_back(cr.lambda);
    }
  }

  LlcEstimate est;
  est.center_loss = center_loss;
  est.chains_used = static_cast<int>(lambdas.size());
  if (lambdas.empty()) {
    throw NumericsError("estimate_llc: all SGLD chains diverged");
  }
  est.lambda_hat = mean(lambdas);
  if (lambdas.size() >= 2) {
    est.std_err = std::sqrt(variance(lambdas) / static_cast<double>(lambdas.size()));
  }
  est.negative_flag = est.lambda_hat < 0.0;
  return est;
}

LlcEstimate estimate_llc(const ParamVector& w_star, const Dataset& train,
                         const Architecture& arch, const SgldConfig& cfg) {
  if (train.size() == 0) {
    throw DataError("estimate_llc: empty dataset");
  }
  NetworkLoss loss(arch, train, cfg.minibatch);
  return estimate_llc(loss, w_star.values, cfg);
}

namespace {

// content hash of the snapshot: duplicate checkpoints get identical chain
// seeds (and therefore identical estimates), distinct ones independent chains
uint64_t param_digest(const ParamVector& p) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : p.values) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

std::vector<LlcEstimate> llc_series(const std::vector<ParamVector>& snapshots,
                                    const Dataset& train, const Architecture& arch,
                                    const SgldConfig& cfg) {
  std::vector<LlcEstimate> out;
  out.reserve(snapshots.size());
  NetworkLoss loss(arch, train, cfg.minibatch);
  for (const ParamVector& snap : snapshots) {
    SgldConfig point_cfg = cfg;
    point_cfg.seed = derive_seed(cfg.seed, {0x73657269ULL, param_digest(snap)});
    out.push_back(estimate_llc(loss, snap.values, point_cfg));
  }
  return out;
}

VolumeScan volume_scan(const PotentialLoss::Fn& loss_fn,
                       std::span<const double> w_star, double delta,
                       std::span<const double> epsilons, int samples,
                       uint64_t seed) {
  const size_t d = w_star.size();
  if (d > 4) {
    throw ConfigError("volume_scan: Monte Carlo oracle limited to dim <= 4");
  }
  if (epsilons.size() < 3) {
    throw ConfigError("volume_scan: need at least 3 epsilon levels");
  }
  const double span_decades =
      std::log10(epsilons.front() / epsilons.back());
  if (std::abs(span_decades) < 2.0) {
    throw ConfigError("volume_scan: epsilon grid must span >= 2 decades");
  }

  const double center_loss = loss_fn(w_star);
  std::vector<double> counts(epsilons.size(), 0.0);
  Rng rng(derive_seed(seed, {0x766f6cULL}));
  std::vector<double> w(d);
  for (int s = 0; s < samples; ++s) {
    // uniform in the d-ball: Gaussian direction, radius ~ u^(1/d)
    double norm2 = 0.0;
    for (size_t i = 0; i < d; ++i) {
      w[i] = rng.normal();
      norm2 += w[i] * w[i];
    }
    const double r =
        delta * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    const double scale = r / std::sqrt(std::max(norm2, 1e-300));
    for (size_t i = 0; i < d; ++i) {
      w[i] = w_star[i] + w[i] * scale;
    }
    const double excess = loss_fn(w) - center_loss;
    for (size_t e = 0; e < epsilons.size(); ++e) {
      if (excess < epsilons[e]) {
        counts[e] += 1.0;
      }
    }
  }

  VolumeScan vs;
  std::vector<double> log_eps, log_vol;
  for (size_t e = 0; e < epsilons.size(); ++e) {
    vs.epsilons.push_back(epsilons[e]);
    const double frac = counts[e] / samples;
    vs.volumes.push_back(frac);
    if (counts[e] == 0.0) {
      vs.skipped_bins++;
      continue;
    }
    log_eps.push_back(std::log(epsilons[e]));
    log_vol.push_back(std::log(frac));
  }
  if (log_eps.size() < 3) {
    throw NumericsError("volume_scan: too few epsilon bins with hits");
  }
  const LinearFit fit = linear_fit(log_eps, log_vol);
  vs.lambda = fit.slope;
  vs.r_squared = fit.r_squared;
  return vs;
}

double negative_fraction(std::span<const LlcEstimate> series) {
  if (series.empty()) {
    throw std::invalid_argument("negative_fraction: empty series");
  }
  size_t neg = 0;
  for (const LlcEstimate& e : series) {
    if (e.negative_flag) {
      neg++;
    }
  }
  return static_cast<double>(neg) / static_cast<double>(series.size());
}

double wbic(double center_loss, double lambda_hat, double m) {
  if (m < 2.0) {
    throw ConfigError("wbic: m must be >= 2");
  }
  return m * center_loss + lambda_hat * std::log(m);
}

std::function<double(double)> loss_slice(const ParamVector& w_star,
                                         const Dataset& data,
                                         const Architecture& arch,
                                         uint64_t direction_seed) {
  Rng rng(derive_seed(direction_seed, {0x736c6963ULL}));
  std::vector<double> dir(w_star.dim());
  double norm2 = 0.0;
  for (double& d : dir) {
    d = rng.normal();
    norm2 += d * d;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& d : dir) {
    d *= inv;
  }
  // copies keep the returned callable self-contained
  return [w_star, dir, data, arch](double s) {
    ParamVector p = w_star;
    for (size_t i = 0; i < p.dim(); ++i) {
      p.values[i] += s * dir[i];
    }
    return loss_only(p, data.as_batch(), arch);
  };
}

}  // namespace fraclab
