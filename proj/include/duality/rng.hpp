#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace duality {

// Deterministic RNG used everywhere in the project. mt19937_64 is fully
// specified by the standard, and all distributions below are hand-rolled
// from raw 64-bit draws, so streams are reproducible bit-for-bit across
// compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is below 2^-50 for any n used here.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; one draw wasted per call to keep the stream position simple.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Random permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  // Derive an independent child stream. Distinct (seed, stream) pairs give
  // unrelated sequences.
  Rng fork(std::uint64_t stream) {
    std::uint64_t z = mix(state_hash() ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    return Rng(z);
  }

 private:
  std::uint64_t state_hash() {
    // Drawing once both advances this stream and keys the child.
    return next_u64();
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace duality
