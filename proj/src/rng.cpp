#include "fraclab/rng.hpp"

#include <cmath>

namespace fraclab {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(root);
  for (uint64_t p : path) {
    h = mix64(h ^ mix64(p));
  }
  return h;
}

double Rng::normal() {
  // Box-Muller, no spare cached: keeps Rng state equal to the engine state.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) {
    return 0;
  }
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = gen_();
  while (x >= limit) {
    x = gen_();
  }
  return x % n;
}

}  // namespace fraclab
