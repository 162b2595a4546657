#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fraclab/ffpe.hpp"
#include "fraclab/validation.hpp"

using namespace fraclab;

namespace {

FfpeProblem double_well(double alpha, int cells = 256) {
  FfpeProblem prob;
  prob.a = -2.0;
  prob.b = 2.0;
  prob.cells = cells;
  prob.potential = [](double x) { return (x * x - 1.0) * (x * x - 1.0); };
  prob.diffusion.assign(static_cast<size_t>(cells), 0.5);
  prob.gamma = 1.0;
  prob.alpha = alpha;
  prob.dt = 0.005;
  return prob;
}

// independent classical backward-Euler reference: same flux math, assembled
// as a dense matrix and solved by Gaussian elimination
std::vector<double> classic_be_step(const FfpeProblem& prob,
                                    const std::vector<double>& p) {
  const int n = prob.cells;
  const double dx = prob.dx();
  auto bern = [](double z) {
    if (std::abs(z) < 1e-10) {
      return 1.0 - 0.5 * z + z * z / 12.0;
    }
    return z / std::expm1(z);
  };
  std::vector<std::vector<double>> A(static_cast<size_t>(n),
                                     std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    A[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
  }
  for (int f = 0; f + 1 < n; ++f) {
    const double dl = prob.diffusion[static_cast<size_t>(f)];
    const double dr = prob.diffusion[static_cast<size_t>(f) + 1];
    const double dface = 2.0 * dl * dr / (dl + dr);
    const double dv = prob.potential(prob.cell_center(f + 1)) -
                      prob.potential(prob.cell_center(f));
    const double u = -prob.gamma * prob.drift_scale * dv / dx;
    const double z = u * dx / dface;
    const double c = prob.dt * dface / (dx * dx);
    const double bm = bern(-z);
    const double bp = bern(z);
    A[static_cast<size_t>(f)][static_cast<size_t>(f)] += c * bm;
    A[static_cast<size_t>(f)][static_cast<size_t>(f) + 1] -= c * bp;
    A[static_cast<size_t>(f) + 1][static_cast<size_t>(f) + 1] += c * bp;
    A[static_cast<size_t>(f) + 1][static_cast<size_t>(f)] -= c * bm;
  }
  // gaussian elimination with partial pivoting
  std::vector<double> x(p);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(A[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
          std::abs(A[static_cast<size_t>(piv)][static_cast<size_t>(col)])) {
        piv = r;
      }
    }
    std::swap(A[static_cast<size_t>(col)], A[static_cast<size_t>(piv)]);
    std::swap(x[static_cast<size_t>(col)], x[static_cast<size_t>(piv)]);
    const double d = A[static_cast<size_t>(col)][static_cast<size_t>(col)];
    for (int r = col + 1; r < n; ++r) {
      const double m = A[static_cast<size_t>(r)][static_cast<size_t>(col)] / d;
      if (m == 0.0) {
        continue;
      }
      for (int c2 = col; c2 < n; ++c2) {
        A[static_cast<size_t>(r)][static_cast<size_t>(c2)] -=
            m * A[static_cast<size_t>(col)][static_cast<size_t>(c2)];
      }
      x[static_cast<size_t>(r)] -= m * x[static_cast<size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double acc = x[static_cast<size_t>(r)];
    for (int c2 = r + 1; c2 < n; ++c2) {
      acc -= A[static_cast<size_t>(r)][static_cast<size_t>(c2)] *
             x[static_cast<size_t>(c2)];
    }
    x[static_cast<size_t>(r)] = acc / A[static_cast<size_t>(r)][static_cast<size_t>(r)];
  }
  return x;
}

}  // namespace

TEST_CASE("caputo derivative of a constant vanishes") {
  std::vector<double> f(65, 3.7);
  for (double alpha : {0.3, 0.7, 1.0}) {
    const auto d = caputo_derivative(f, alpha, 0.1);
    for (double v : d) {
      CHECK(std::abs(v) < 1e-14);
    }
  }
}

TEST_CASE("caputo derivative of t at alpha 1/2 hits the analytic value") {
  const int n = 512;
  const double dt = 1.0 / n;
  std::vector<double> f(static_cast<size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    f[static_cast<size_t>(i)] = i * dt;
  }
  const auto d = caputo_derivative(f, 0.5, dt);
  // exact: t^(1-a)/Gamma(2-a) = 1/Gamma(1.5) = 1.1283791671
  CHECK(d.back() == doctest::Approx(1.1283791671).epsilon(1e-9));
  // and the t-dependence is t^0.5 / Gamma(1.5)
  const double at_quarter = d[static_cast<size_t>(n) / 4 - 1];
  CHECK(at_quarter == doctest::Approx(std::sqrt(0.25) / std::tgamma(1.5))
                          .epsilon(1e-6));
}

TEST_CASE("caputo alpha=1 degenerates to backward differences") {
  std::vector<double> f{0.0, 0.5, 2.0, 4.5};
  const auto d = caputo_derivative(f, 1.0, 0.5);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(3.0));
  CHECK(d[2] == doctest::Approx(5.0));
}

TEST_CASE("caputo kernel weights are positive and decreasing") {
  const CaputoKernel k(0.5, 0.1, 32);
  for (size_t j = 0; j < k.weights.size(); ++j) {
    CHECK(k.weights[j] > 0.0);
    if (j > 0) {
      CHECK(k.weights[j] < k.weights[j - 1]);
    }
  }
  const CaputoKernel k1(1.0, 0.1, 8);
  CHECK(k1.weights[0] == doctest::Approx(1.0));
  for (size_t j = 1; j < k1.weights.size(); ++j) {
    CHECK(k1.weights[j] == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(CaputoKernel(0.0, 0.1, 8), ConfigError);
  CHECK_THROWS_AS(CaputoKernel(1.2, 0.1, 8), ConfigError);
  CHECK_THROWS_AS(caputo_derivative(std::vector<double>{1.0, 2.0}, -0.5, 0.1),
                  ConfigError);
}

TEST_CASE("L1 scheme converges at order 2 - alpha") {
  const auto results = check_caputo();
  for (const CheckResult& r : results) {
    CHECK_MESSAGE(r.passed, r.name, ": ", r.detail);
  }
}

TEST_CASE("flat potential keeps a uniform density stationary for any D") {
  FfpeProblem prob;
  prob.a = 0.0;
  prob.b = 1.0;
  prob.cells = 64;
  prob.potential = [](double) { return 0.0; };
  prob.diffusion.resize(64);
  for (int i = 0; i < 64; ++i) {
    prob.diffusion[static_cast<size_t>(i)] = 0.5 + 0.4 * std::sin(0.3 * i);
  }
  prob.alpha = 0.8;
  prob.dt = 0.01;
  FfpeState st = make_uniform_state(prob);
  const std::vector<double> p0 = st.p;
  for (int s = 0; s < 50; ++s) {
    ffpe_step(st, prob);
  }
  for (int i = 0; i < 64; ++i) {
    CHECK(st.p[static_cast<size_t>(i)] ==
          doctest::Approx(p0[static_cast<size_t>(i)]).epsilon(1e-12));
  }
  CHECK(st.max_mass_drift < 1e-12);
  CHECK(st.clipped_cells == 0);
}

TEST_CASE("alpha=1 quadratic well matches the analytic OU relaxation") {
  FfpeProblem prob;
  prob.a = -6.0;
  prob.b = 6.0;
  prob.cells = 600;
  prob.potential = [](double x) { return 0.5 * x * x; };  // k = 1
  prob.diffusion.assign(600, 0.2);
  prob.gamma = 1.0;
  prob.alpha = 1.0;
  prob.dt = 0.002;

  const double m0 = 1.0;
  const double s0 = 0.4;
  FfpeState st = make_initial_state(prob, [&] {
    std::vector<double> p(600);
    for (int i = 0; i < 600; ++i) {
      const double x = prob.cell_center(i);
      p[static_cast<size_t>(i)] = std::exp(-0.5 * (x - m0) * (x - m0) / (s0 * s0));
    }
    return p;
  }());

  const double var_inf = 0.2;  // D / (gamma k)
  for (int checkpoint : {250, 500}) {
    const int start = checkpoint == 250 ? 0 : 250;
    for (int s = start; s < checkpoint; ++s) {
      ffpe_step(st, prob);
    }
    const double t = prob.dt * checkpoint;
    const auto [mean_t, var_t] = density_moments(prob, st.p);
    const double mean_exact = m0 * std::exp(-t);
    const double var_exact = var_inf + (s0 * s0 - var_inf) * std::exp(-2.0 * t);
    CHECK(std::abs(mean_t - mean_exact) < 0.01 * std::max(1.0, std::abs(mean_exact)));
    CHECK(std::abs(var_t - var_exact) < 0.01 * var_exact);
  }
}

TEST_CASE("alpha=1 stepping equals an independent classical solver") {
  FfpeProblem prob = double_well(1.0, 96);
  FfpeState st = make_gaussian_state(prob, 0.5, 0.3);
  std::vector<double> ref = st.p;
  for (int s = 0; s < 25; ++s) {
    ffpe_step(st, prob);
    ref = classic_be_step(prob, ref);
    double worst = 0.0;
    for (int i = 0; i < prob.cells; ++i) {
      worst = std::max(worst, std::abs(st.p[static_cast<size_t>(i)] -
                                       ref[static_cast<size_t>(i)]));
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("boltzmann stationary density") {
  SUBCASE("constant potential gives the uniform density") {
    FfpeProblem prob = double_well(1.0, 50);
    prob.potential = [](double) { return 2.0; };
    const auto p = boltzmann_stationary(prob);
    for (double v : p) {
      CHECK(v == doctest::Approx(1.0 / (prob.b - prob.a)).epsilon(1e-12));
    }
  }
  SUBCASE("double well is symmetric and bimodal with peaks at +-1") {
    FfpeProblem prob = double_well(1.0, 200);
    const auto p = boltzmann_stationary(prob);
    for (int i = 0; i < 100; ++i) {
      CHECK(p[static_cast<size_t>(i)] ==
            doctest::Approx(p[static_cast<size_t>(199 - i)]).epsilon(1e-12));
    }
    const int argmax =
        static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    CHECK(std::abs(std::abs(prob.cell_center(argmax)) - 1.0) < 0.02);
    // local minimum at the barrier
    CHECK(p[100] < 0.5 * p[static_cast<size_t>(argmax)]);
  }
  SUBCASE("non-constant diffusion violates the constant-coefficient hypothesis") {
    FfpeProblem prob = double_well(1.0, 50);
    for (int i = 0; i < 50; ++i) {
      prob.diffusion[static_cast<size_t>(i)] = 0.5 + 0.2 * (i % 2);
    }
    CHECK_THROWS_WITH_AS(boltzmann_stationary(prob),
                         doctest::Contains("hypothesis"), ConfigError);
  }
}

TEST_CASE("long fractional run lands on the boltzmann density") {
  // alpha = 0.75 here; the full {0.5, 0.75, 1.0} sweep runs in validation
  FfpeProblem prob = double_well(0.75);
  prob.time_stretch = 1.005;
  FfpeState st = make_gaussian_state(prob, 0.8, 0.3);
  for (int s = 0; s < 4000; ++s) {
    ffpe_step(st, prob);
  }
  const auto ps = boltzmann_stationary(prob);
  CHECK(l1_distance(st.p, ps, prob.dx()) < 1e-3);
  CHECK(st.max_mass_drift < 1e-10);
}

TEST_CASE("flipping the drift sign breaks the steady-state check") {
  const auto good = check_steady_state(1.0);
  for (const auto& r : good) {
    CHECK_MESSAGE(r.passed, r.name, ": ", r.detail);
  }
  const auto bad = check_steady_state(-1.0);
  int failures = 0;
  for (const auto& r : bad) {
    if (!r.passed) {
      failures++;
    }
  }
  CHECK(failures == static_cast<int>(bad.size()));
}

TEST_CASE("stationary state is independent of alpha") {
  std::vector<std::vector<double>> finals;
  for (double alpha : {0.6, 1.0}) {
    FfpeProblem prob = double_well(alpha, 128);
    prob.time_stretch = 1.006;
    FfpeState st = make_gaussian_state(prob, 0.8, 0.3);
    for (int s = 0; s < 2500; ++s) {
      ffpe_step(st, prob);
    }
    finals.push_back(st.p);
  }
  CHECK(l1_distance(finals[0], finals[1], 4.0 / 128) < 1e-3);
}

TEST_CASE("smaller alpha relaxes more slowly at matched times") {
  // same problem, uniform dt; compare the L1 distance to stationarity at a
  // matched early time
  std::vector<double> dist;
  for (double alpha : {0.6, 1.0}) {
    FfpeProblem prob = double_well(alpha, 128);
    prob.dt = 0.01;
    FfpeState st = make_gaussian_state(prob, 0.8, 0.3);
    for (int s = 0; s < 500; ++s) {  // t = 5
      ffpe_step(st, prob);
    }
    dist.push_back(l1_distance(st.p, boltzmann_stationary(prob), prob.dx()));
  }
  CHECK(dist[0] > dist[1]);  // alpha 0.6 is farther from stationarity
}

TEST_CASE("time to reach L1 0.1 decreases with alpha") {
  std::vector<double> t_hit;
  for (double alpha : {0.5, 0.75, 1.0}) {
    FfpeProblem prob = double_well(alpha, 128);
    prob.dt = 0.01;
    prob.time_stretch = 1.004;
    FfpeState st = make_gaussian_state(prob, 0.8, 0.3);
    const auto ps = boltzmann_stationary(prob);
    double hit = -1.0;
    for (int s = 0; s < 3000; ++s) {
      ffpe_step(st, prob);
      if (hit < 0.0 && l1_distance(st.p, ps, prob.dx()) < 0.1) {
        hit = st.t;
        break;
      }
    }
    REQUIRE(hit > 0.0);
    t_hit.push_back(hit);
  }
  CHECK(t_hit[0] > t_hit[1]);
  CHECK(t_hit[1] > t_hit[2]);
}

TEST_CASE("posterior identity") {
  const auto results = check_posterior_identity();
  for (const CheckResult& r : results) {
    CHECK_MESSAGE(r.passed, r.name, ": ", r.detail);
  }

  // deviation ignores the normalization of p_s
  FfpeProblem prob = double_well(1.0, 64);
  const auto ps = boltzmann_stationary(prob);
  std::vector<double> v(64);
  for (int i = 0; i < 64; ++i) {
    v[static_cast<size_t>(i)] = prob.potential(prob.cell_center(i));
  }
  std::vector<double> scaled(ps);
  for (double& x : scaled) {
    x *= 3.7;
  }
  const double a = posterior_identity_check(ps, v, 50.0, 0.5);
  const double b = posterior_identity_check(scaled, v, 50.0, 0.5);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("homogenization: oscillatory diffusion vs harmonic mean") {
  FfpeProblem base;
  base.a = 0.0;
  base.b = 1.0;
  base.cells = 512;
  base.potential = [](double x) { return 2.0 * (x - 0.5) * (x - 0.5); };
  base.diffusion.assign(512, 1.0);
  base.gamma = 1.0;
  base.alpha = 1.0;
  base.dt = 2e-5;

  SUBCASE("constant D reproduces itself") {
    const auto rep = effective_vs_resolved(
        base, [](double) { return 1.5; }, 1.0 / 16.0, 400);
    CHECK(rep.d_hat == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(rep.l1_max < 1e-10);
  }
  SUBCASE("alternating {1,3} homogenizes to 1.5 and converges with period") {
    auto osc = [](double period) {
      return [period](double x) {
        return std::fmod(x, period) < 0.5 * period ? 1.0 : 3.0;
      };
    };
    CHECK(harmonic_mean_over_period(osc(0.125), 0.0, 0.125) ==
          doctest::Approx(1.5).epsilon(1e-9));
    std::vector<double> dist;
    for (double period : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
      const auto rep = effective_vs_resolved(base, osc(period), period, 400);
      CHECK(rep.d_hat == doctest::Approx(1.5).epsilon(1e-9));
      dist.push_back(rep.l1_at_end);
    }
    CHECK(dist[1] < dist[0]);
    CHECK(dist[2] < dist[1]);
  }
  SUBCASE("alpha != 1 is rejected") {
    FfpeProblem frac = base;
    frac.alpha = 0.7;
    CHECK_THROWS_AS(
        effective_vs_resolved(frac, [](double) { return 1.0; }, 0.1, 10),
        ConfigError);
  }
  SUBCASE("period close to the domain size sets the warning") {
    const auto rep = effective_vs_resolved(
        base, [](double) { return 1.0; }, 0.5, 10);
    CHECK(rep.period_warning);
  }
}

TEST_CASE("problem validation catches bad configurations") {
  FfpeProblem prob = double_well(1.0, 64);
  prob.alpha = 1.5;
  CHECK_THROWS_AS(prob.validate(), ConfigError);
  prob = double_well(1.0, 64);
  prob.diffusion[3] = -0.1;
  CHECK_THROWS_AS(prob.validate(), ConfigError);
  prob = double_well(1.0, 64);
  prob.dt = 0.0;
  CHECK_THROWS_AS(prob.validate(), ConfigError);
  prob = double_well(1.0, 64);
  prob.potential = [](double) { return std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_AS(prob.validate(), NumericsError);
}
