#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fraclab/stats.hpp"

namespace fraclab {

// OLS on (log t, log R): slope = 1/nu = d_s / (2 lambda).
struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;  // c, in natural log units
  double r_squared = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  size_t points_used = 0;
};

struct DimensionReport {
  double d_s = std::numeric_limits<double>::quiet_NaN();
  double nu = std::numeric_limits<double>::quiet_NaN();      // 1/slope
  double d_walk = std::numeric_limits<double>::quiet_NaN();  // 2*lambda/d_s
  double lambda_final = std::numeric_limits<double>::quiet_NaN();
  double lambda_bar = std::numeric_limits<double>::quiet_NaN();
  bool spectral_bound_holds = false;      // d_s <= lambda_final
  bool averaged_bound_holds = false;  // d_s <= lambda_bar
  double margin = std::numeric_limits<double>::quiet_NaN();  // min of the two
  bool subdiffusive = false;          // slope <= 0.5, i.e. nu >= 2
  bool diffusive_boundary = false;    // slope >= 0.5 (d_walk <= 2)
  bool valid = true;
  PowerLawFit fit;
};

struct EffectiveDiffusion {
  double xi = 1.0;
  double nu_w = 0.0;   // d_s / (2 lambda)
  double d_xi = 0.0;   // xi^(2 - 1/nu_w)
};

struct FitWindow {
  double t_min = 0.0;  // inclusive
  double t_max = std::numeric_limits<double>::infinity();
};

PowerLawFit fit_power_law(std::span<const double> t, std::span<const double> r,
                          const FitWindow& window = {});

// Window covering the post-transient part of a telemetry series: drops the
// leading `discard_fraction` of points (and always the t=0 row).
FitWindow tail_window(std::span<const double> t, double discard_fraction = 0.2);

double spectral_dimension(const PowerLawFit& fit, double lambda_final);

// Inequality verdicts from an LLC series and a spectral dimension. The
// leading discard_fraction of the series is treated as pre-asymptotic.
DimensionReport check_inequalities(std::span<const double> llc_series,
                                   double d_s, const PowerLawFit& fit,
                                   double discard_fraction = 0.2);

EffectiveDiffusion effective_diffusion(double xi, double nu_w);
EffectiveDiffusion effective_diffusion(double xi, double lambda_w, double d_s);

struct ExponentHistogram {
  Histogram hist;
  std::vector<double> exponents;  // 2 - 1/nu per run
  double median = 0.0;
  double skew = 0.0;
  bool concentration_verdict = false;  // median above midpoint of range
};

ExponentHistogram diffusion_exponent_histogram(
    std::span<const DimensionReport> reports, size_t bins);

struct LlcGenFit {
  LinearFit fit;
  double pearson = 0.0;
  size_t points = 0;
};

LlcGenFit llc_vs_generalization(std::span<const double> llc_finals,
                                std::span<const double> gen_errors);

}  // namespace fraclab
