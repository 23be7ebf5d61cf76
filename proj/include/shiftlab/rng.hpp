#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace shiftlab {

// Deterministic splitmix64 generator. Produces the same stream on every
// platform and compiler, which the training/eval reproducibility contract
// depends on (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(bounded(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; one value per call, the twin is discarded to keep the
  // consumption pattern trivially predictable.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable seed derivation for substreams (per-epoch shuffles, per-image draws).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng g(seed ^ (0x632be59bd9b4e019ull + 0x9e3779b97f4a7c15ull * stream));
  return g.next_u64();
}

}  // namespace shiftlab
