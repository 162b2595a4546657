#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fraclab/llc.hpp"
#include "fraclab/trainer.hpp"
#include "fraclab/validation.hpp"

using namespace fraclab;

namespace {

std::vector<double> geometric_grid(double hi, double lo, int n) {
  std::vector<double> g(static_cast<size_t>(n));
  const double ratio = std::pow(lo / hi, 1.0 / (n - 1));
  double v = hi;
  for (int i = 0; i < n; ++i) {
    g[static_cast<size_t>(i)] = v;
    v *= ratio;
  }
  return g;
}

PotentialLoss quadratic_potential(size_t dim, int m) {
  return PotentialLoss(
      dim, m,
      [](std::span<const double> w) {
        double s = 0.0;
        for (double v : w) {
          s += v * v;
        }
        return s;
      },
      [](std::span<const double> w, std::span<double> g) {
        for (size_t i = 0; i < w.size(); ++i) {
          g[i] = 2.0 * w[i];
        }
      });
}

SgldConfig toy_cfg() {
  SgldConfig cfg;
  cfg.step_size = 1e-4;
  cfg.gamma_loc = 1.0;
  cfg.chains = 4;
  cfg.draws = 2000;
  cfg.burn_in = 400;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("wbic formula") {
  CHECK(wbic(2.5, 0.0, 100) == doctest::Approx(250.0).epsilon(1e-15));
  const double e = std::exp(1.0);
  CHECK(wbic(1.0, 2.0, e) == doctest::Approx(e + 2.0).epsilon(1e-14));
  // monotone in lambda
  CHECK(wbic(1.0, 3.0, 50) > wbic(1.0, 2.0, 50));
  CHECK_THROWS_AS(wbic(1.0, 1.0, 1.0), ConfigError);
}

TEST_CASE("volume_scan recovers analytic exponents") {
  const auto eps = geometric_grid(1.0, 0.008, 16);
  const double w0[] = {0.0};

  SUBCASE("w^2 has lambda 1/2") {
    const VolumeScan vs = volume_scan(
        [](std::span<const double> w) { return w[0] * w[0]; },
        std::span<const double>(w0, 1), 1.0, eps, 200000, 42);
    CHECK(vs.lambda == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(vs.lambda - 0.5) < 0.05);
    CHECK(vs.r_squared > 0.999);
    // V(eps) is nonincreasing as eps decreases
    for (size_t i = 1; i < vs.volumes.size(); ++i) {
      CHECK(vs.volumes[i] <= vs.volumes[i - 1]);
    }
  }
  SUBCASE("w^4 has lambda 1/4") {
    const VolumeScan vs = volume_scan(
        [](std::span<const double> w) {
          return w[0] * w[0] * w[0] * w[0];
        },
        std::span<const double>(w0, 1), 1.0, eps, 200000, 43);
    CHECK(std::abs(vs.lambda - 0.25) < 0.05);
  }
  SUBCASE("w1^2 w2^2 fits lambda 1/2 with a log correction") {
    // V(eps) ~ eps^(1/2) log(1/eps): the effective slope is 0.5 - 1/ln(1/eps),
    // so the window must sit deep for the correction to fall inside 0.1
    const double w2[] = {0.0, 0.0};
    const auto deep = geometric_grid(1e-8, 1e-12, 16);
    const VolumeScan vs = volume_scan(
        [](std::span<const double> w) {
          return w[0] * w[0] * w[1] * w[1];
        },
        std::span<const double>(w2, 2), 1.0, deep, 8000000, 44);
    CHECK(std::abs(vs.lambda - 0.5) < 0.1);
  }
}

TEST_CASE("volume_scan input contracts") {
  const auto eps_narrow = geometric_grid(1.0, 0.5, 5);  // < 2 decades
  const double w0[] = {0.0};
  CHECK_THROWS_AS(
      volume_scan([](std::span<const double> w) { return w[0] * w[0]; },
                  std::span<const double>(w0, 1), 1.0, eps_narrow, 1000, 1),
      ConfigError);

  const std::vector<double> w5(5, 0.0);
  const auto eps = geometric_grid(1.0, 0.008, 10);
  CHECK_THROWS_AS(
      volume_scan([](std::span<const double> w) { return w[0] * w[0]; }, w5,
                  1.0, eps, 1000, 1),
      ConfigError);
}

TEST_CASE("estimate_llc matches the regular-model value d/2") {
  for (size_t d : {size_t(1), size_t(2)}) {
    const PotentialLoss pot = quadratic_potential(d, 10000);
    const std::vector<double> w0(d, 0.0);
    const LlcEstimate est = estimate_llc(pot, w0, toy_cfg());
    const double expect = static_cast<double>(d) / 2.0;
    CHECK_MESSAGE(std::abs(est.lambda_hat - expect) < 0.2 * expect,
                  "d=", d, " lambda_hat=", est.lambda_hat);
    CHECK(!est.negative_flag);
    CHECK(est.chains_used == 4);
    // upper bound lambda <= d/2 within sampler noise
    CHECK(est.lambda_hat <= expect + 3.0 * est.std_err + 0.05);
  }
}

TEST_CASE("estimate_llc on the quartic potential") {
  PotentialLoss pot(
      1, 10000,
      [](std::span<const double> w) { return std::pow(w[0], 4.0); },
      [](std::span<const double> w, std::span<double> g) {
        g[0] = 4.0 * std::pow(w[0], 3.0);
      });
  const std::vector<double> w0{0.0};
  SgldConfig cfg = toy_cfg();
  cfg.step_size = 2e-4;
  cfg.draws = 3000;
  cfg.burn_in = 500;
  const LlcEstimate est = estimate_llc(pot, w0, cfg);
  CHECK(std::abs(est.lambda_hat - 0.25) < 0.25 * 0.25 + 0.02);
}

TEST_CASE("estimate_llc is deterministic for fixed seeds") {
  const PotentialLoss pot = quadratic_potential(2, 5000);
  const std::vector<double> w0(2, 0.0);
  const LlcEstimate a = estimate_llc(pot, w0, toy_cfg());
  const LlcEstimate b = estimate_llc(pot, w0, toy_cfg());
  CHECK(a.lambda_hat == b.lambda_hat);  // bitwise
  CHECK(a.std_err == b.std_err);
}

TEST_CASE("far from a minimum the estimator goes negative") {
  const PotentialLoss pot = quadratic_potential(1, 10000);
  const std::vector<double> w_star{3.0};  // mid-slope, far from w=0
  SgldConfig cfg = toy_cfg();
  cfg.draws = 500;
  cfg.burn_in = 100;
  const LlcEstimate est = estimate_llc(pot, w_star, cfg);
  CHECK(est.negative_flag);
  CHECK(est.lambda_hat < 0.0);
}

TEST_CASE("doubling chains shrinks std_err by about 1/sqrt(2)") {
  const PotentialLoss pot = quadratic_potential(1, 10000);
  const std::vector<double> w0{0.0};
  SgldConfig base = toy_cfg();
  base.draws = 400;
  base.burn_in = 100;
  double sum4 = 0.0, sum8 = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    SgldConfig c4 = base;
    c4.chains = 4;
    c4.seed = derive_seed(1000, {static_cast<uint64_t>(rep), 4});
    SgldConfig c8 = base;
    c8.chains = 8;
    c8.seed = derive_seed(1000, {static_cast<uint64_t>(rep), 8});
    sum4 += estimate_llc(pot, w0, c4).std_err;
    sum8 += estimate_llc(pot, w0, c8).std_err;
  }
  const double ratio = sum8 / sum4;
  const double expect = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(ratio - expect) < 0.3 * expect);
}

TEST_CASE("sgld estimates agree with the volume oracle on all toys") {
  for (const CheckResult& r : check_llc_toys()) {
    CHECK_MESSAGE(r.passed, r.name, ": ", r.detail);
  }
}

TEST_CASE("near-stability fraction") {
  std::vector<LlcEstimate> series(4);
  for (auto& e : series) {
    e.negative_flag = false;
  }
  CHECK(negative_fraction(series) == 0.0);
  series[2].negative_flag = true;
  CHECK(negative_fraction(series) == doctest::Approx(0.25));
}

TEST_CASE("divergent chains are dropped and reported") {
  // potential whose gradient explodes: exp growth away from 0
  PotentialLoss pot(
      1, 1000,
      [](std::span<const double> w) { return std::exp(10.0 * w[0] * w[0]); },
      [](std::span<const double> w, std::span<double> g) {
        g[0] = 20.0 * w[0] * std::exp(10.0 * w[0] * w[0]);
      });
  const std::vector<double> w0{2.0};  // loss e^40 > 1e6 from the start
  SgldConfig cfg = toy_cfg();
  cfg.draws = 50;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(estimate_llc(pot, w0, cfg), NumericsError);  // all chains
}

TEST_CASE("llc series on a converged blobs run") {
  // overlapping classes keep the loss floor (and so the local posterior
  // signal) away from zero
  const Dataset full = synth_blobs(3, 4, 220, 0.5, 64);
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.seed = 2;
  auto [train, test] = split(full, spec);

  RunConfig cfg;
  cfg.arch = Architecture{{4, 8, 8, 3}, Activation::kRelu, false};
  cfg.opt.learning_rate = 0.02;
  cfg.opt.batch_size = 16;
  cfg.epochs = 150;  // 21 steps/epoch -> 3150 steps
  cfg.seed = 11;
  cfg.telemetry_every = 100;
  cfg.llc_every = 100;
  cfg.sgld.step_size = 1e-4;
  cfg.sgld.gamma_loc = 50.0;
  cfg.sgld.chains = 4;
  cfg.sgld.draws = 600;
  cfg.sgld.burn_in = 200;
  cfg.sgld.minibatch = 32;
  const TrajectoryLog log = train_run(cfg, train, test);
  REQUIRE(!log.failed);

  std::vector<double> llc;
  std::vector<LlcEstimate> series;
  for (size_t i = 0; i < log.rows(); ++i) {
    if (!std::isnan(log.llc[i])) {
      llc.push_back(log.llc[i]);
      LlcEstimate e;
      e.lambda_hat = log.llc[i];
      e.negative_flag = log.llc_negative[i] != 0;
      series.push_back(e);
    }
  }
  REQUIRE(llc.size() >= 20);

  // converges around an average value: trailing-10 std below 20% of its mean
  std::vector<double> tail(llc.end() - 10, llc.end());
  const double m = mean(tail);
  CHECK(m > 0.0);
  CHECK(std::sqrt(variance(tail)) < 0.2 * m);

  // bound lambda(t) <= d/2 + 3 stderr holds everywhere
  const double half_d = static_cast<double>(cfg.arch.param_count()) / 2.0;
  for (size_t i = 0; i < log.rows(); ++i) {
    if (!std::isnan(log.llc[i])) {
      CHECK(log.llc[i] <= half_d + 3.0 * log.llc_std_err[i] + 1e-9);
    }
  }

  // converged run: negative estimates are rare
  CHECK(negative_fraction(series) < 0.1);
}

TEST_CASE("beta needs at least 3 data points") {
  const PotentialLoss pot = quadratic_potential(1, 2);
  const std::vector<double> w0{0.0};
  CHECK_THROWS_AS(estimate_llc(pot, w0, toy_cfg()), ConfigError);
}

TEST_CASE("zero-hit epsilon bins are excluded and counted") {
  // potential with a loss floor: no sample ever lands below excess 0.05,
  // so the deepest epsilon levels collect zero hits
  const auto eps = geometric_grid(1.0, 1e-4, 12);
  const double w0[] = {0.0};
  const VolumeScan vs = volume_scan(
      [](std::span<const double> w) {
        return w[0] * w[0] > 1e-6 ? 0.05 + w[0] * w[0] : 0.0;
      },
      std::span<const double>(w0, 1), 1.0, eps, 50000, 3);
  CHECK(vs.skipped_bins > 0);
  CHECK(vs.volumes.size() == eps.size());
}

TEST_CASE("loss slice through a trained point is a usable 1-D potential") {
  const Dataset train = synth_blobs(2, 3, 80, 0.4, 21);
  const Architecture arch{{3, 6, 2}, Activation::kRelu, false};
  const ParamVector p = init_params(arch, 5);
  const auto slice = loss_slice(p, train, arch, 99);
  const double at0 = slice(0.0);
  CHECK(at0 == doctest::Approx(loss_only(p, train.as_batch(), arch)));
  CHECK(std::isfinite(slice(0.5)));
  CHECK(std::isfinite(slice(-0.5)));

  // determinism in the direction seed
  const auto slice2 = loss_slice(p, train, arch, 99);
  CHECK(slice(0.3) == slice2(0.3));
  const auto other = loss_slice(p, train, arch, 100);
  CHECK(slice(0.3) != other(0.3));
}

TEST_CASE("duplicate snapshots give identical series estimates") {
  const Dataset train = synth_blobs(2, 3, 60, 0.3, 9);
  const Architecture arch{{3, 6, 2}, Activation::kRelu, false};
  const ParamVector p = init_params(arch, 14);
  SgldConfig cfg;
  cfg.step_size = 5e-5;
  cfg.gamma_loc = 50.0;
  cfg.chains = 2;
  cfg.draws = 80;
  cfg.burn_in = 30;
  cfg.minibatch = 16;
  cfg.seed = 77;
  const auto series = llc_series({p, p}, train, arch, cfg);
  REQUIRE(series.size() == 2);
  CHECK(series[0].lambda_hat == series[1].lambda_hat);  // bitwise
  CHECK(series[0].std_err == series[1].std_err);
}
