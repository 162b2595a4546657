#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fraclab {

// All randomness in a run flows from one root seed. Substreams are derived by
// hashing (root, path...) with splitmix64, so parallel workers never share
// state and any piece of a run can be reproduced in isolation.
uint64_t mix64(uint64_t x);
uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path);

// mt19937_64 engine with pinned output transforms. std::normal_distribution
// and friends are implementation-defined, which would tie checkpoints and
// manifests to one libstdc++ build; Box-Muller on 53-bit uniforms is not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fraclab
