#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fraclab/rng.hpp"
#include "fraclab/stats.hpp"

using namespace fraclab;

TEST_CASE("derive_seed separates substreams") {
  const uint64_t root = 42;
  CHECK(derive_seed(root, {1}) != derive_seed(root, {2}));
  CHECK(derive_seed(root, {1, 2}) != derive_seed(root, {2, 1}));
  CHECK(derive_seed(root, {1}) == derive_seed(root, {1}));
  CHECK(derive_seed(1, {5}) != derive_seed(2, {5}));
}

TEST_CASE("uniform stays in [0,1) and is deterministic") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("normal moments") {
  Rng rng(7);
  const int n = 200000;
  std::vector<double> xs(n);
  for (double& x : xs) {
    x = rng.normal();
  }
  CHECK(std::abs(mean(xs)) < 3.0 / std::sqrt(double(n)));
  CHECK(variance(xs) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(excess_kurtosis(xs)) < 0.1);
}

TEST_CASE("below is within range and roughly uniform") {
  Rng rng(9);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const uint64_t v = rng.below(10);
    REQUIRE(v < 10);
    counts[v]++;
  }
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(11);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto w = v;
  rng.shuffle(w);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}
