#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fraclab/data.hpp"
#include "fraclab/nn.hpp"
#include "fraclab/rng.hpp"
#include "fraclab/stats.hpp"

namespace fraclab {

// Localized SGLD sampler settings. The inverse temperature is always
// 1/log(m) with m the data size, so it is not a field here.
struct SgldConfig {
  double step_size = 1e-4;
  double gamma_loc = 100.0;  // soft-ball restraint; 100/delta^2 with delta=1
  int chains = 4;
  int draws = 200;  // total steps per chain
  int burn_in = 90;
  int minibatch = 0;  // 0 = use the full data per step
  uint64_t seed = 1;

  void validate() const;
};

struct LlcEstimate {
  double lambda_hat = 0.0;
  double std_err = 0.0;  // across chains
  int chains_used = 0;
  bool negative_flag = false;
  double center_loss = 0.0;  // L_m(w*)
};

// Anything SGLD can sample: the network loss over a dataset, or an analytic
// toy potential with a pseudo sample count.
class SampledLoss {
 public:
  virtual ~SampledLoss() = default;
  virtual int data_size() const = 0;  // m
  virtual size_t dim() const = 0;
  virtual double full_loss(std::span<const double> w) const = 0;
  // Stochastic loss/gradient at w; returns the minibatch loss.
  virtual double loss_grad(std::span<const double> w, Rng& rng,
                           std::span<double> grad_out) const = 0;
};

class NetworkLoss : public SampledLoss {
 public:
  NetworkLoss(const Architecture& arch, const Dataset& data, int minibatch);
  int data_size() const override { return data_.size(); }
  size_t dim() const override;
  double full_loss(std::span<const double> w) const override;
  double loss_grad(std::span<const double> w, Rng& rng,
                   std::span<double> grad_out) const override;

 private:
  Architecture arch_;
  const Dataset& data_;
  int minibatch_;
  ParamVector proto_;  // carries the layer layout
};

class PotentialLoss : public SampledLoss {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;
  PotentialLoss(size_t dim, int pseudo_m, Fn loss, GradFn grad)
      : dim_(dim), m_(pseudo_m), loss_(std::move(loss)), grad_(std::move(grad)) {}
  int data_size() const override { return m_; }
  size_t dim() const override { return dim_; }
  double full_loss(std::span<const double> w) const override { return loss_(w); }
  double loss_grad(std::span<const double> w, Rng&,
                   std::span<double> grad_out) const override {
    grad_(w, grad_out);
    return loss_(w);
  }

 private:
  size_t dim_;
  int m_;
  Fn loss_;
  GradFn grad_;
};

LlcEstimate estimate_llc(const SampledLoss& loss, std::span<const double> w_star,
                         const SgldConfig& cfg);
// Convenience overload for a trained network at w*.
LlcEstimate estimate_llc(const ParamVector& w_star, const Dataset& train,
                         const Architecture& arch, const SgldConfig& cfg);

// One estimate per stored parameter snapshot, chains re-seeded per point.
std::vector<LlcEstimate> llc_series(const std::vector<ParamVector>& snapshots,
                                    const Dataset& train, const Architecture& arch,
                                    const SgldConfig& cfg);

struct VolumeScan {
  std::vector<double> epsilons;  // decreasing
  std::vector<double> volumes;   // V(eps), ball-volume units
  double lambda = 0.0;           // log-log slope
  double r_squared = 0.0;
  int skipped_bins = 0;  // eps levels with zero Monte Carlo hits
};

// Direct volume-scaling measurement of the learning coefficient on a toy
// potential: uniform Monte Carlo over the ball B(w*, delta), V(eps) =
// fraction with L(w) - L(w*) < eps. Independent of the SGLD path.
VolumeScan volume_scan(const PotentialLoss::Fn& loss_fn,
                       std::span<const double> w_star, double delta,
                       std::span<const double> epsilons, int samples,
                       uint64_t seed);

double negative_fraction(std::span<const LlcEstimate> series);

// m * L_m + lambda * log m
double wbic(double center_loss, double lambda_hat, double m);

// 1-D section of the network loss through w_star along a random unit
// direction: s -> L(w* + s u). Usable as an FFPE potential.
std::function<double(double)> loss_slice(const ParamVector& w_star,
                                         const Dataset& data,
                                         const Architecture& arch,
                                         uint64_t direction_seed);

}  // namespace fraclab
