#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

// Uniform-grid L1 weights for the Caputo derivative of order alpha in (0,1].
// alpha = 1 degenerates to the ordinary backward difference.
struct CaputoKernel {
  double alpha = 1.0;
  double dt = 1.0;
  std::vector<double> weights;  // b_j = (j+1)^(1-a) - j^(1-a), positive, decreasing

  CaputoKernel(double alpha, double dt, int max_steps);
};

// D^alpha f at t_1..t_n from samples f(t_0..t_n), uniform spacing dt.
std::vector<double> caputo_derivative(std::span<const double> f, double alpha,
                                      double dt);

// 1-D fractional Fokker-Planck problem on a uniform cell grid over [a, b]
// with reflecting (zero-flux) boundaries:
//   D^alpha_t p = d/dx ( D(x) dp/dx + gamma p dV/dx )
// The drift sign is fixed so the stationary density is exp(-gamma V / D).
struct FfpeProblem {
  double a = -2.0;
  double b = 2.0;
  int cells = 256;
  std::function<double(double)> potential;   // V(x)
  std::vector<double> diffusion;             // D per cell, > 0
  double gamma = 1.0;
  double alpha = 1.0;
  double dt = 1e-3;
  // dt_k = dt * time_stretch^k: a geometric time mesh reaches the asymptotic
  // regime within the history budget. 1.0 = uniform.
  double time_stretch = 1.0;
  // Exploration knob: scales the drift term (set -1 to flip it uphill).
  double drift_scale = 1.0;

  double dx() const { return (b - a) / cells; }
  double cell_center(int i) const { return a + (i + 0.5) * dx(); }
  void validate() const;
};

struct FfpeState {
  std::vector<double> p;  // density per cell, sum*dx == 1
  double t = 0.0;
  std::vector<std::vector<double>> history;  // past densities (Caputo memory)
  std::vector<double> times;                 // time of each history entry
  double max_mass_drift = 0.0;
  int clipped_cells = 0;  // negative cells clipped beyond 1e-12
};

FfpeState make_initial_state(const FfpeProblem& prob,
                             std::span<const double> p0);
FfpeState make_uniform_state(const FfpeProblem& prob);
FfpeState make_gaussian_state(const FfpeProblem& prob, double mean,
                              double sd);

// One implicit step of the L1/finite-volume scheme. Throws NumericsError on
// mass drift beyond 1e-8.
void ffpe_step(FfpeState& state, const FfpeProblem& prob);

// Boltzmann stationary density exp(-gamma V / D) on the cell grid. Requires
// an (approximately) constant diffusion coefficient.
std::vector<double> boltzmann_stationary(const FfpeProblem& prob);

// Max deviation from the grid mean of  m*D_xi*log p_s(w) + m*V(w); zero when
// p_s^(m D_xi) is proportional to the likelihood exp(-m V).
double posterior_identity_check(std::span<const double> p_s,
                                std::span<const double> v, double m,
                                double d_xi);

double l1_distance(std::span<const double> p, std::span<const double> q,
                   double dx);

// Mean and variance of the density (for the analytic relaxation checks).
std::pair<double, double> density_moments(const FfpeProblem& prob,
                                          std::span<const double> p);

struct HomogenizationReport {
  double d_hat = 0.0;          // harmonic mean over one period
  double l1_at_end = 0.0;      // resolved vs homogenized at final time
  double l1_max = 0.0;         // worst over snapshots
  int steps = 0;
  bool period_warning = false;  // period not << domain
};

// Solves a resolved oscillatory-D problem and its homogenized counterpart
// (harmonic-mean D) side by side, alpha = 1 only.
HomogenizationReport effective_vs_resolved(const FfpeProblem& base,
                                           const std::function<double(double)>& d_of_x,
                                           double period, int steps);

// Harmonic mean of D over one period at resolution n (the 1-D homogenized
// coefficient).
double harmonic_mean_over_period(const std::function<double(double)>& d_of_x,
                                 double x0, double period, int n = 4096);

}  // namespace fraclab
