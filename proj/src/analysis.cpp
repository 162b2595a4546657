#include "fraclab/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "fraclab/common.hpp"

namespace fraclab {

PowerLawFit fit_power_law(std::span<const double> t, std::span<const double> r,
                          const FitWindow& window) {
  if (t.size() != r.size()) {
    throw std::invalid_argument("fit_power_law: series length mismatch");
  }
  std::vector<double> log_t, log_r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0 || r[i] <= 0.0) {
      continue;  // t=0 and nonpositive displacements carry no log-log signal
    }
    if (t[i] < window.t_min || t[i] > window.t_max) {
      continue;
    }
    log_t.push_back(std::log(t[i]));
    log_r.push_back(std::log(r[i]));
    lo = std::min(lo, t[i]);
    hi = std::max(hi, t[i]);
  }
  if (log_t.size() < 3) {
    throw TelemetryError("fit_power_law: fewer than 3 usable points in window");
  }
  const LinearFit f = linear_fit(log_t, log_r);
  PowerLawFit out;
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.r_squared = f.r_squared;
  out.t_min = lo;
  out.t_max = hi;
  out.points_used = f.n;
  return out;
}

FitWindow tail_window(std::span<const double> t, double discard_fraction) {
  if (t.empty()) {
    throw TelemetryError("tail_window: empty series");
  }
  if (discard_fraction < 0.0 || discard_fraction >= 1.0) {
    throw ConfigError("tail_window: discard fraction must be in [0,1)");
  }
  std::vector<double> positive;
  for (double v : t) {
    if (v > 0.0) {
      positive.push_back(v);
    }
  }
  if (positive.empty()) {
    throw TelemetryError("tail_window: no positive times");
  }
  std::sort(positive.begin(), positive.end());
  const size_t skip = static_cast<size_t>(
      std::floor(discard_fraction * static_cast<double>(positive.size())));
  FitWindow w;
  w.t_min = positive[std::min(skip, positive.size() - 1)];
  return w;
}

double spectral_dimension(const PowerLawFit& fit, double lambda_final) {
  if (fit.slope <= 0.0) {
    throw NumericsError("spectral_dimension: fit slope must be positive");
  }
  if (lambda_final <= 0.0) {
    throw NumericsError("spectral_dimension: lambda must be positive");
  }
  return 2.0 * lambda_final * fit.slope;
}

DimensionReport check_inequalities(std::span<const double> llc_series,
                                   double d_s, const PowerLawFit& fit,
                                   double discard_fraction) {
  if (llc_series.empty()) {
    throw TelemetryError("check_inequalities: empty LLC series");
  }
  std::vector<double> finite;
  for (double v : llc_series) {
    if (!std::isnan(v)) {
      finite.push_back(v);
    }
  }
  DimensionReport rep;
  rep.fit = fit;
  rep.d_s = d_s;
  if (finite.empty()) {
    rep.valid = false;
    return rep;
  }
  bool any_positive = false;
  for (double v : finite) {
    if (v >= 0.0) {
      any_positive = true;
    }
  }
  if (!any_positive) {
    rep.valid = false;  // the estimator never got near a minimum
    return rep;
  }

  const size_t skip = static_cast<size_t>(
      std::floor(discard_fraction * static_cast<double>(finite.size())));
  std::vector<double> retained(finite.begin() + static_cast<long>(skip),
                               finite.end());
  if (retained.empty()) {
    retained = finite;
  }
  rep.lambda_bar = mean(retained);

  const size_t tail = std::min<size_t>(10, retained.size());
  std::vector<double> last(retained.end() - static_cast<long>(tail),
                           retained.end());
  rep.lambda_final = mean(last);

  rep.nu = fit.slope != 0.0 ? 1.0 / fit.slope
                            : std::numeric_limits<double>::infinity();
  rep.d_walk = d_s != 0.0 ? 2.0 * rep.lambda_final / d_s
                          : std::numeric_limits<double>::quiet_NaN();
  rep.spectral_bound_holds = d_s <= rep.lambda_final;
  rep.averaged_bound_holds = d_s <= rep.lambda_bar;
  rep.margin = std::min(rep.lambda_final - d_s, rep.lambda_bar - d_s);
  rep.subdiffusive = fit.slope <= 0.5;
  rep.diffusive_boundary = fit.slope >= 0.5;
  return rep;
}

EffectiveDiffusion effective_diffusion(double xi, double nu_w) {
  if (xi <= 0.0) {
    throw NumericsError("effective_diffusion: xi must be positive");
  }
  if (nu_w == 0.0) {
    throw NumericsError("effective_diffusion: nu must be nonzero");
  }
  EffectiveDiffusion d;
  d.xi = xi;
  d.nu_w = nu_w;
  d.d_xi = std::pow(xi, 2.0 - 1.0 / nu_w);
  return d;
}

EffectiveDiffusion effective_diffusion(double xi, double lambda_w, double d_s) {
  if (lambda_w <= 0.0 || d_s <= 0.0) {
    throw NumericsError("effective_diffusion: lambda and d_s must be positive");
  }
  return effective_diffusion(xi, d_s / (2.0 * lambda_w));
}

ExponentHistogram diffusion_exponent_histogram(
    std::span<const DimensionReport> reports, size_t bins) {
  if (reports.size() < 2) {
    throw TelemetryError("diffusion_exponent_histogram: need >= 2 runs");
  }
  ExponentHistogram out;
  for (const DimensionReport& r : reports) {
    if (!r.valid || std::isnan(r.nu) || r.nu == 0.0) {
      continue;
    }
    out.exponents.push_back(2.0 - 1.0 / r.nu);
  }
  if (out.exponents.size() < 2) {
    throw TelemetryError("diffusion_exponent_histogram: too few valid runs");
  }
  out.hist = histogram(out.exponents, bins);
  out.median = median(out.exponents);

  const double m = mean(out.exponents);
  double m2 = 0.0, m3 = 0.0;
  for (double e : out.exponents) {
    m2 += (e - m) * (e - m);
    m3 += (e - m) * (e - m) * (e - m);
  }
  m2 /= static_cast<double>(out.exponents.size());
  m3 /= static_cast<double>(out.exponents.size());
  out.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

  const double midpoint = 0.5 * (out.hist.lo + out.hist.hi);
  out.concentration_verdict = out.median > midpoint;
  return out;
}

LlcGenFit llc_vs_generalization(std::span<const double> llc_finals,
                                std::span<const double> gen_errors) {
  if (llc_finals.size() != gen_errors.size() || llc_finals.size() < 5) {
    throw TelemetryError("llc_vs_generalization: need >= 5 paired points");
  }
  LlcGenFit out;
  out.fit = linear_fit(llc_finals, gen_errors);  // throws on degenerate x
  out.pearson = pearson_r(llc_finals, gen_errors);
  out.points = llc_finals.size();
  return out;
}

}  // namespace fraclab
