#include "fraclab/ffpe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace fraclab {

namespace {

constexpr double kMassHardLimit = 1e-8;
constexpr double kClipReportThreshold = 1e-12;

// Bernoulli function z / (e^z - 1) with a stable small-z branch.
double bernoulli_fn(double z) {
  if (std::abs(z) < 1e-10) {
    return 1.0 - 0.5 * z + z * z / 12.0;
  }
  z = std::clamp(z, -500.0, 500.0);
  return z / std::expm1(z);
}

// Scharfetter-Gummel face coefficients with zero-flux boundaries. The scaled
// face flux is G_f = cm_f p_f - cp_f p_{f+1} and row i of the operator is
// (L p)_i = G_{i-1} - G_i; the discrete stationary state is exactly the
// Boltzmann density at the cell centers.
struct FluxCoeffs {
  std::vector<double> cm, cp;  // one entry per interior face
};

FluxCoeffs assemble_flux_coeffs(const FfpeProblem& prob) {
  const int n = prob.cells;
  const double dx = prob.dx();
  FluxCoeffs fc;
  fc.cm.resize(static_cast<size_t>(n) - 1);
  fc.cp.resize(static_cast<size_t>(n) - 1);
  for (int f = 0; f + 1 < n; ++f) {
    const double dl = prob.diffusion[static_cast<size_t>(f)];
    const double dr = prob.diffusion[static_cast<size_t>(f) + 1];
    const double d_face = 2.0 * dl * dr / (dl + dr);
    const double dv = prob.potential(prob.cell_center(f + 1)) -
                      prob.potential(prob.cell_center(f));
    const double u = -prob.gamma * prob.drift_scale * dv / dx;  // drift velocity
    const double z = u * dx / d_face;
    const double c = d_face / (dx * dx);
    fc.cm[static_cast<size_t>(f)] = c * bernoulli_fn(-z);
    fc.cp[static_cast<size_t>(f)] = c * bernoulli_fn(z);
  }
  return fc;
}

void thomas_solve(const std::vector<double>& lower, const std::vector<double>& diag,
                  const std::vector<double>& upper, std::vector<double>& rhs) {
  const size_t n = diag.size();
  std::vector<double> cp(n);
  std::vector<double> dp(n);
  cp[0] = upper[0] / diag[0];
  dp[0] = rhs[0] / diag[0];
  for (size_t i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i] * cp[i - 1];
    cp[i] = upper[i] / m;
    dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
  }
  rhs[n - 1] = dp[n - 1];
  for (size_t i = n - 1; i-- > 0;) {
    rhs[i] = dp[i] - cp[i] * rhs[i + 1];
  }
}

double total_mass(std::span<const double> p, double dx) {
  double s = 0.0;
  for (double v : p) {
    s += v;
  }
  return s * dx;
}

}  // namespace

CaputoKernel::CaputoKernel(double a, double step, int max_steps)
    : alpha(a), dt(step) {
  if (alpha <= 0.0 || alpha > 1.0) {
    throw ConfigError("caputo: alpha must be in (0, 1]");
  }
  if (dt <= 0.0 || max_steps < 1) {
    throw ConfigError("caputo: dt and max_steps must be positive");
  }
  weights.resize(static_cast<size_t>(max_steps));
  weights[0] = 1.0;  // j=0 term; pow(0, 0) would spoil the alpha=1 limit
  for (int j = 1; j < max_steps; ++j) {
    weights[static_cast<size_t>(j)] =
        std::pow(j + 1.0, 1.0 - alpha) - std::pow(static_cast<double>(j), 1.0 - alpha);
  }
}

std::vector<double> caputo_derivative(std::span<const double> f, double alpha,
                                      double dt) {
  if (f.size() < 2) {
    throw ConfigError("caputo_derivative: need at least 2 samples");
  }
  const int n = static_cast<int>(f.size()) - 1;
  const CaputoKernel kernel(alpha, dt, n);
  std::vector<double> out(static_cast<size_t>(n));
  const double scale = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);
  for (int i = 1; i <= n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < i; ++j) {
      acc += kernel.weights[static_cast<size_t>(j)] *
             (f[static_cast<size_t>(i - j)] - f[static_cast<size_t>(i - j - 1)]);
    }
    out[static_cast<size_t>(i) - 1] = scale * acc;
  }
  return out;
}

void FfpeProblem::validate() const {
  if (!(b > a)) {
    throw ConfigError("ffpe: domain must satisfy a < b");
  }
  if (cells < 3) {
    throw ConfigError("ffpe: need at least 3 cells");
  }
  if (static_cast<int>(diffusion.size()) != cells) {
    throw ConfigError("ffpe: diffusion must have one value per cell");
  }
  for (double d : diffusion) {
    if (!(d > 0.0)) {
      throw ConfigError("ffpe: diffusion must be positive");
    }
  }
  if (alpha <= 0.0 || alpha > 1.0) {
    throw ConfigError("ffpe: alpha must be in (0, 1]");
  }
  if (dt <= 0.0) {
    throw ConfigError("ffpe: dt must be positive");
  }
  if (time_stretch < 1.0) {
    throw ConfigError("ffpe: time_stretch must be >= 1");
  }
  if (!potential) {
    throw ConfigError("ffpe: potential not set");
  }
  for (int i = 0; i < cells; ++i) {
    if (!std::isfinite(potential(cell_center(i)))) {
      throw NumericsError("ffpe: potential not finite on grid");
    }
  }
}

FfpeState make_initial_state(const FfpeProblem& prob,
                             std::span<const double> p0) {
  prob.validate();
  if (static_cast<int>(p0.size()) != prob.cells) {
    throw ConfigError("ffpe: initial density size mismatch");
  }
  FfpeState st;
  st.p.assign(p0.begin(), p0.end());
  const double mass = total_mass(st.p, prob.dx());
  if (!(mass > 0.0)) {
    throw ConfigError("ffpe: initial density has nonpositive mass");
  }
  for (double& v : st.p) {
    v /= mass;
  }
  st.t = 0.0;
  st.times.push_back(0.0);
  return st;
}

FfpeState make_uniform_state(const FfpeProblem& prob) {
  std::vector<double> p(static_cast<size_t>(prob.cells), 1.0);
  return make_initial_state(prob, p);
}

FfpeState make_gaussian_state(const FfpeProblem& prob, double mean, double sd) {
  std::vector<double> p(static_cast<size_t>(prob.cells));
  for (int i = 0; i < prob.cells; ++i) {
    const double x = prob.cell_center(i);
    p[static_cast<size_t>(i)] = std::exp(-0.5 * (x - mean) * (x - mean) / (sd * sd));
  }
  return make_initial_state(prob, p);
}

void ffpe_step(FfpeState& state, const FfpeProblem& prob) {
  const int n = prob.cells;
  const double dx = prob.dx();
  const int step_index = static_cast<int>(state.times.size()) - 1;  // completed steps
  const double tau =
      prob.dt * std::pow(prob.time_stretch, static_cast<double>(step_index));
  const double t_new = state.t + tau;

  const FluxCoeffs fc = assemble_flux_coeffs(prob);

  std::vector<double> rhs(state.p);
  double r;  // effective time factor multiplying L
  if (prob.alpha == 1.0) {
    r = tau;
  } else {
    const double gamma2 = std::tgamma(2.0 - prob.alpha);
    const double c_n = std::pow(tau, -prob.alpha) / gamma2;
    r = 1.0 / c_n;
    // history sum over past increments p^{k+1} - p^k
    if (!state.history.empty()) {
      std::vector<double> hist_acc(static_cast<size_t>(n), 0.0);
      for (size_t k = 0; k < state.history.size(); ++k) {
        const double t_k = state.times[k];
        const double t_k1 = state.times[k + 1];
        const double tau_k = t_k1 - t_k;
        const double a_k = (std::pow(t_new - t_k, 1.0 - prob.alpha) -
                            std::pow(t_new - t_k1, 1.0 - prob.alpha)) /
                           (tau_k * gamma2);
        const std::vector<double>& inc = state.history[k];
        for (int i = 0; i < n; ++i) {
          hist_acc[static_cast<size_t>(i)] += a_k * inc[static_cast<size_t>(i)];
        }
      }
      for (int i = 0; i < n; ++i) {
        rhs[static_cast<size_t>(i)] -= r * hist_acc[static_cast<size_t>(i)];
      }
    }
  }

  // (I - r L) p_new = rhs
  std::vector<double> lower(static_cast<size_t>(n), 0.0),
      diag(static_cast<size_t>(n), 1.0), upper(static_cast<size_t>(n), 0.0);
  for (int f = 0; f + 1 < n; ++f) {
    const double cm = fc.cm[static_cast<size_t>(f)];
    const double cp = fc.cp[static_cast<size_t>(f)];
    diag[static_cast<size_t>(f)] += r * cm;
    upper[static_cast<size_t>(f)] -= r * cp;
    diag[static_cast<size_t>(f) + 1] += r * cp;
    lower[static_cast<size_t>(f) + 1] -= r * cm;
  }
  std::vector<double> p_new(rhs);
  thomas_solve(lower, diag, upper, p_new);

  // Conservative rewrite: express the step through face fluxes of the solved
  // density. At large tau the raw solve loses the mass identity to roundoff
  // (matrix entries ~ r/dx^2); the telescoping flux form restores it.
  {
    std::vector<double> g(static_cast<size_t>(n) - 1);
    for (int f = 0; f + 1 < n; ++f) {
      g[static_cast<size_t>(f)] =
          fc.cm[static_cast<size_t>(f)] * p_new[static_cast<size_t>(f)] -
          fc.cp[static_cast<size_t>(f)] * p_new[static_cast<size_t>(f) + 1];
    }
    for (int i = 0; i < n; ++i) {
      const double g_left = i > 0 ? g[static_cast<size_t>(i) - 1] : 0.0;
      const double g_right = i + 1 < n ? g[static_cast<size_t>(i)] : 0.0;
      p_new[static_cast<size_t>(i)] = rhs[static_cast<size_t>(i)] +
                                      r * (g_left - g_right);
    }
  }

  // clip negatives; only violations beyond the report threshold are counted
  for (double& v : p_new) {
    if (v < 0.0) {
      if (v < -kClipReportThreshold) {
        state.clipped_cells++;
      }
      v = 0.0;
    }
  }

  const double mass = total_mass(p_new, dx);
  const double drift = std::abs(mass - 1.0);
  state.max_mass_drift = std::max(state.max_mass_drift, drift);
  if (drift > kMassHardLimit) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", drift);
    throw NumericsError(std::string("ffpe_step: mass drift ") + buf +
                        " exceeds 1e-8");
  }

  if (prob.alpha < 1.0) {
    std::vector<double> inc(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      inc[static_cast<size_t>(i)] =
          p_new[static_cast<size_t>(i)] - state.p[static_cast<size_t>(i)];
    }
    state.history.push_back(std::move(inc));
  }
  state.p = std::move(p_new);
  state.t = t_new;
  state.times.push_back(t_new);
}

std::vector<double> boltzmann_stationary(const FfpeProblem& prob) {
  prob.validate();
  const auto [dmin, dmax] =
      std::minmax_element(prob.diffusion.begin(), prob.diffusion.end());
  if (*dmax / *dmin > 1.05) {
    throw ConfigError(
        "boltzmann_stationary: diffusion varies beyond the constant-coefficient "
        "hypothesis of the steady-state result (max/min > 1.05)");
  }
  double d_bar = 0.0;
  for (double d : prob.diffusion) {
    d_bar += d;
  }
  d_bar /= prob.cells;

  std::vector<double> p(static_cast<size_t>(prob.cells));
  double vmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < prob.cells; ++i) {
    vmin = std::min(vmin, prob.potential(prob.cell_center(i)));
  }
  for (int i = 0; i < prob.cells; ++i) {
    const double v = prob.potential(prob.cell_center(i));
    p[static_cast<size_t>(i)] = std::exp(-prob.gamma * (v - vmin) / d_bar);
  }
  const double mass = total_mass(p, prob.dx());
  for (double& v : p) {
    v /= mass;
  }
  return p;
}

double posterior_identity_check(std::span<const double> p_s,
                                std::span<const double> v, double m,
                                double d_xi) {
  if (p_s.size() != v.size() || p_s.empty()) {
    throw ConfigError("posterior_identity_check: grid size mismatch");
  }
  std::vector<double> q(p_s.size());
  for (size_t i = 0; i < p_s.size(); ++i) {
    if (!(p_s[i] > 0.0)) {
      throw NumericsError("posterior_identity_check: density must be positive");
    }
    q[i] = m * d_xi * std::log(p_s[i]) + m * v[i];
  }
  double meanq = 0.0;
  for (double x : q) {
    meanq += x;
  }
  meanq /= static_cast<double>(q.size());
  double dev = 0.0;
  for (double x : q) {
    dev = std::max(dev, std::abs(x - meanq));
  }
  return dev;
}

double l1_distance(std::span<const double> p, std::span<const double> q,
                   double dx) {
  if (p.size() != q.size()) {
    throw ConfigError("l1_distance: size mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    s += std::abs(p[i] - q[i]);
  }
  return s * dx;
}

std::pair<double, double> density_moments(const FfpeProblem& prob,
                                          std::span<const double> p) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < prob.cells; ++i) {
    const double x = prob.cell_center(i);
    const double w = p[static_cast<size_t>(i)];
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  const double mean = m1 / m0;
  return {mean, m2 / m0 - mean * mean};
}

double harmonic_mean_over_period(const std::function<double(double)>& d_of_x,
                                 double x0, double period, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + period * (i + 0.5) / n;
    acc += 1.0 / d_of_x(x);
  }
  return static_cast<double>(n) / acc;
}

HomogenizationReport effective_vs_resolved(
    const FfpeProblem& base, const std::function<double(double)>& d_of_x,
    double period, int steps) {
  if (base.alpha != 1.0) {
    throw ConfigError("effective_vs_resolved: alpha must be 1");
  }
  HomogenizationReport rep;
  rep.steps = steps;
  if (period > (base.b - base.a) / 4.0) {
    rep.period_warning = true;
  }

  FfpeProblem resolved = base;
  resolved.diffusion.resize(static_cast<size_t>(base.cells));
  for (int i = 0; i < base.cells; ++i) {
    resolved.diffusion[static_cast<size_t>(i)] = d_of_x(base.cell_center(i));
  }
  rep.d_hat = harmonic_mean_over_period(d_of_x, base.a, period);
  FfpeProblem homog = base;
  homog.diffusion.assign(static_cast<size_t>(base.cells), rep.d_hat);

  const double mid = 0.5 * (base.a + base.b);
  const double sd = (base.b - base.a) / 8.0;
  FfpeState sr = make_gaussian_state(resolved, mid, sd);
  FfpeState sh = make_gaussian_state(homog, mid, sd);

  const int snap = std::max(1, steps / 16);
  for (int s = 1; s <= steps; ++s) {
    ffpe_step(sr, resolved);
    ffpe_step(sh, homog);
    if (s % snap == 0 || s == steps) {
      const double d = l1_distance(sr.p, sh.p, base.dx());
      rep.l1_max = std::max(rep.l1_max, d);
      rep.l1_at_end = d;
    }
  }
  return rep;
}

}  // namespace fraclab
