#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "shiftlab/rng.hpp"
#include "shiftlab/signal.hpp"
#include "shiftlab/tensor.hpp"

using namespace shiftlab;

namespace {

const Signal1D kConvInput = {0, 0, 0, 0, 1, 2, 0, 0, 0, 0};
const Signal1D kKernel = {1, 0, 1};
const Signal1D kSubsampleInput = {0, 0, 0, 0, 0, 0, 0, 0, 0, 3, 2, 5, 2, 4, 1,
                                  6, 3, 4, 6, 5, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0};
const Signal1D kHomogeneousInput = {0, 0, 0, 0, 0, 0, 2, 2, 3, 3, 1, 1, 2, 2, 0, 0, 0, 0, 0, 0};

// random signal whose nonzero content sits at least `margin` samples from
// both ends
Signal1D random_interior_signal(std::size_t n, std::size_t margin, Rng& rng) {
  Signal1D s(n, 0.0);
  for (std::size_t i = margin; i < n - margin; ++i) s[i] = rng.uniform_real(-1.0, 1.0);
  return s;
}

}  // namespace

TEST_CASE("correlate1d reproduces the dense filtering rows") {
  CHECK(correlate1d(kConvInput, kKernel, 1) == Signal1D{0, 0, 1, 2, 1, 2, 0, 0});
  CHECK(correlate1d(translate1d(kConvInput, 1), kKernel, 1) == Signal1D{0, 0, 0, 1, 2, 1, 2, 0});
  CHECK(correlate1d(translate1d(kConvInput, 2), kKernel, 1) == Signal1D{0, 0, 0, 0, 1, 2, 1, 2});
}

TEST_CASE("correlate1d reproduces the strided filtering rows") {
  CHECK(correlate1d(kConvInput, kKernel, 2) == Signal1D{0, 1, 1, 0});
  CHECK(correlate1d(translate1d(kConvInput, 1), kKernel, 2) == Signal1D{0, 0, 2, 2});
  CHECK(correlate1d(translate1d(kConvInput, 2), kKernel, 2) == Signal1D{0, 0, 1, 1});
}

TEST_CASE("correlate1d rejects bad arguments") {
  CHECK_THROWS_AS(correlate1d(kConvInput, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(correlate1d({1, 2}, {1, 2, 3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(correlate1d(kConvInput, kKernel, 0), std::invalid_argument);
}

TEST_CASE("correlate1d output length follows the width formula") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(4, 30));
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t s = static_cast<std::size_t>(rng.uniform_int(1, 3));
    Signal1D in(n, 1.0);
    Signal1D kern(k, 0.5);
    CHECK(correlate1d(in, kern, s).size() == (n - k) / s + 1);
  }
}

TEST_CASE("subsample1d reproduces the factor-4 family rows") {
  const std::vector<Signal1D> expected = {
      {0, 0, 0, 2, 3, 5, 0, 0}, {0, 0, 0, 5, 6, 5, 0, 0}, {0, 0, 0, 2, 1, 6, 0, 0},
      {0, 0, 0, 3, 4, 4, 0, 0}, {0, 0, 0, 0, 2, 3, 5, 0}, {0, 0, 0, 0, 5, 6, 5, 0},
      {0, 0, 0, 0, 2, 1, 6, 0}, {0, 0, 0, 0, 3, 4, 4, 0}, {0, 0, 0, 0, 0, 2, 3, 5}};
  for (int shift = 0; shift <= 8; ++shift) {
    CHECK(subsample1d(translate1d(kSubsampleInput, shift), 4, 0) ==
          expected[static_cast<std::size_t>(shift)]);
  }
}

TEST_CASE("subsample1d basics") {
  const Signal1D s = {1, 2, 3, 4, 5};
  CHECK(subsample1d(s, 1, 0) == s);
  CHECK(subsample1d(s, 2, 0) == Signal1D{1, 3, 5});
  CHECK(subsample1d(s, 2, 1) == Signal1D{2, 4});
  CHECK_THROWS_AS(subsample1d(s, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(subsample1d(s, 0, 0), std::invalid_argument);
}

TEST_CASE("subsampling yields exactly s distinct output families") {
  // every shifted output equals a translate of the family whose offset is
  // congruent to -shift (mod 4); families differ in length by one, so equality
  // means "same value where defined, zero elsewhere"
  auto equals_shifted = [](const Signal1D& observed, const Signal1D& family, int lag) {
    for (std::size_t j = 0; j < observed.size(); ++j) {
      const long long src = static_cast<long long>(j) - lag;
      const double expected =
          (src >= 0 && src < static_cast<long long>(family.size()))
              ? family[static_cast<std::size_t>(src)]
              : 0.0;
      if (observed[j] != expected) return false;
    }
    return true;
  };

  std::vector<Signal1D> families;
  for (std::size_t o = 0; o < 4; ++o) families.push_back(subsample1d(kSubsampleInput, 4, o));
  std::set<Signal1D> distinct(families.begin(), families.end());
  CHECK(distinct.size() == 4);

  for (int u = 0; u <= 8; ++u) {
    const Signal1D observed = subsample1d(translate1d(kSubsampleInput, u), 4, 0);
    const std::size_t o = static_cast<std::size_t>((4 - u % 4) % 4);
    const int lag = (u + static_cast<int>(o)) / 4;
    CHECK(equals_shifted(observed, families[o], lag));
  }
}

TEST_CASE("check_equivariance holds for dense filtering") {
  CHECK(check_equivariance(kConvInput, kKernel, 1));
  CHECK(check_equivariance(kConvInput, kKernel, 0));

  Rng rng(101);
  int trials = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(16, 32));
    const Signal1D s = random_interior_signal(n, 5, rng);
    Signal1D kern(static_cast<std::size_t>(rng.uniform_int(1, 5)));
    for (double& v : kern) v = rng.uniform_real(-1.0, 1.0);
    if (kern.size() > s.size()) continue;
    const int shift = rng.uniform_int(-3, 3);
    CHECK(check_equivariance(s, kern, shift));
    ++trials;
  }
  CHECK(trials >= 990);
}

TEST_CASE("check_shiftability matches the factor-4 table verdicts") {
  for (int u : {0, 4, 8}) {
    const ShiftabilityVerdict v = check_shiftability(kSubsampleInput, 4, u);
    CHECK(v.holds);
    CHECK(v.scaled_shift.num == u / 4);
    CHECK(v.scaled_shift.den == 1);
    CHECK(v.observed_output == v.expected_output);
  }
  for (int u : {1, 2, 3, 5, 6, 7}) {
    const ShiftabilityVerdict v = check_shiftability(kSubsampleInput, 4, u);
    CHECK_FALSE(v.holds);
    CHECK(v.expected_output.empty());
    CHECK(v.scaled_shift.den == 4 / std::gcd(4, u));
  }
}

TEST_CASE("shiftability holds for stride multiples on random signals") {
  Rng rng(211);
  for (int i = 0; i < 300; ++i) {
    const std::size_t s = static_cast<std::size_t>(2 << rng.uniform_int(0, 2));  // 2, 4, 8
    const Signal1D sig = random_interior_signal(64, 20, rng);
    const int v = rng.uniform_int(-2, 2);
    const int u = static_cast<int>(s) * v;
    CHECK(check_shiftability(sig, s, u).holds);
  }
}

TEST_CASE("local_homogeneity scores aligned windows") {
  CHECK(local_homogeneity(kHomogeneousInput, 2) == 0.0);
  CHECK(local_homogeneity(Signal1D(17, 3.25), 4) == 0.0);
  CHECK(local_homogeneity({0, 1, 0, 1}, 2) == doctest::Approx(0.25));
  CHECK_THROWS_AS(local_homogeneity({1, 2}, 3), std::invalid_argument);
  CHECK_THROWS_AS(local_homogeneity({1, 2}, 0), std::invalid_argument);
}

TEST_CASE("homogeneous signals give equal-or-shifted subsampled outputs") {
  // sampling grid anchored at 1 pairs each sample with its in-block
  // neighbour, so stepping by one inside a block leaves the output unchanged
  const Signal1D row0 = subsample1d(translate1d(kHomogeneousInput, 0), 2, 1);
  const Signal1D row1 = subsample1d(translate1d(kHomogeneousInput, 1), 2, 1);
  const Signal1D row2 = subsample1d(translate1d(kHomogeneousInput, 2), 2, 1);
  const Signal1D row3 = subsample1d(translate1d(kHomogeneousInput, 3), 2, 1);
  const Signal1D row4 = subsample1d(translate1d(kHomogeneousInput, 4), 2, 1);
  CHECK(row0 == row1);
  CHECK(row2 == row3);
  CHECK(row2 == translate1d(row0, 1));
  CHECK(row4 == translate1d(row2, 1));
}

TEST_CASE("signal_similarity finds shifted copies") {
  const Signal1D a = {0, 0, 1, 2, 0, 0};
  const Signal1D b = {0, 0, 0, 1, 2, 0};
  CHECK(*signal_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*signal_movement(a, b) == 1);

  CHECK(*signal_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*signal_movement(a, a) == 0);

  const Signal1D c = {0, 0, 2, 3, 0, 0};
  // cos of (1,2) and (2,3) at lag 0: 8 / sqrt(5 * 13)
  CHECK(*signal_similarity(a, c) == doctest::Approx(8.0 / std::sqrt(65.0)).epsilon(1e-10));
  CHECK(*signal_movement(a, c) == 0);
}

TEST_CASE("signal_similarity error handling") {
  CHECK_THROWS_AS(signal_similarity({1, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_FALSE(signal_similarity({0, 0, 0}, {1, 2, 3}).has_value());
  CHECK_FALSE(signal_movement({1, 2, 3}, {0, 0, 0}).has_value());
}

TEST_CASE("subsampled factor-4 outputs move by a quarter of the input shift") {
  const Signal1D out0 = subsample1d(kSubsampleInput, 4, 0);
  const Signal1D out4 = subsample1d(translate1d(kSubsampleInput, 4), 4, 0);
  CHECK(*signal_movement(out0, out4) == 1);
}

TEST_CASE("similarity is symmetric and movement antisymmetric") {
  // holds when the maximizing lag does not push content off the canvas, so
  // compare signals that really are shifted copies (optionally perturbed)
  Rng rng(313);
  for (int i = 0; i < 100; ++i) {
    Signal1D a = random_interior_signal(20, 6, rng);
    Signal1D b = translate1d(a, rng.uniform_int(-3, 3));
    if (rng.uniform01() < 0.5) {
      for (std::size_t j = 6; j < 14; ++j) b[j] += rng.uniform_real(-0.05, 0.05);
    }
    CHECK(*signal_similarity(a, b) == *signal_similarity(b, a));
    CHECK(*signal_movement(a, b) == -*signal_movement(b, a));
  }
}
