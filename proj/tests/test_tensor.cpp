#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "shiftlab/rng.hpp"
#include "shiftlab/tensor.hpp"

using namespace shiftlab;

namespace {

Tensor random_interior(std::size_t h, std::size_t w, std::size_t margin, Rng& rng) {
  Tensor t({1, 1, h, w});
  for (std::size_t y = margin; y < h - margin; ++y)
    for (std::size_t x = margin; x < w - margin; ++x)
      t.at4(0, 0, y, x) = rng.uniform_real(-2.0, 2.0);
  return t;
}

// independent index-map oracle for translate2d
Tensor translate_oracle(const Tensor& t, int dy, int dx) {
  Tensor out(t.shape());
  const long long H = t.dim(2), W = t.dim(3);
  for (std::size_t b = 0; b < t.dim(0); ++b)
    for (std::size_t c = 0; c < t.dim(1); ++c)
      for (long long y = 0; y < H; ++y)
        for (long long x = 0; x < W; ++x) {
          const long long sy = y - dy, sx = x - dx;
          if (sy >= 0 && sy < H && sx >= 0 && sx < W)
            out.at4(b, c, y, x) = t.at4(b, c, sy, sx);
        }
  return out;
}

std::vector<double> sorted_nonzeros(const Tensor& t) {
  std::vector<double> v;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0) v.push_back(t[i]);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("Tensor shape and data length stay consistent") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
  CHECK(Tensor({0, 4}).size() == 0);
  CHECK(t.all_finite());
  t[0] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("zero_pad2d grows the canvas and keeps content centered") {
  Tensor mnist({2, 1, 28, 28});
  mnist.at4(1, 0, 0, 0) = 0.5;
  mnist.at4(1, 0, 27, 27) = 0.25;
  const Tensor padded = zero_pad2d(mnist, 6);
  CHECK(padded.shape() == std::vector<std::size_t>{2, 1, 40, 40});
  CHECK(padded.at4(1, 0, 6, 6) == 0.5);
  CHECK(padded.at4(1, 0, 33, 33) == 0.25);

  // every border cell is exactly zero
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      if (y >= 6 && y < 34 && x >= 6 && x < 34) continue;
      CHECK(padded.at4(1, 0, y, x) == 0.0);
    }

  const Tensor cifar = zero_pad2d(Tensor({1, 3, 32, 32}), 10);
  CHECK(cifar.dim(2) == 52);
  CHECK(cifar.dim(3) == 52);

  Tensor t({1, 1, 3, 3});
  t.at4(0, 0, 1, 1) = 7.0;
  const Tensor same = zero_pad2d(t, 0);
  CHECK(same.values() == t.values());

  CHECK_THROWS_AS(zero_pad2d(Tensor({3, 3}), 1), std::invalid_argument);
}

TEST_CASE("translate2d basics") {
  Rng rng(11);
  Tensor t = random_interior(6, 6, 0, rng);

  SUBCASE("zero shift is the identity") {
    CHECK(translate2d(t, {0, 0}).values() == t.values());
  }
  SUBCASE("single pixel moves by (dy, dx)") {
    Tensor one({1, 1, 5, 7});
    one.at4(0, 0, 2, 3) = 1.5;
    const Tensor moved = translate2d(one, {1, 2});
    CHECK(moved.at4(0, 0, 3, 5) == 1.5);
    CHECK(sorted_nonzeros(moved).size() == 1);
  }
  SUBCASE("shape never changes") {
    CHECK(translate2d(t, {4, -3}).shape() == t.shape());
  }
  SUBCASE("shift past the canvas gives all zeros") {
    const Tensor gone = translate2d(t, {7, 0});
    CHECK(sorted_nonzeros(gone).empty());
  }
  SUBCASE("matches the index-map oracle") {
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        CHECK(translate2d(t, {dy, dx}).values() == translate_oracle(t, dy, dx).values());
      }
  }
}

TEST_CASE("translate2d round trip on interior-supported tensors") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor t = random_interior(8, 8, 2, rng);
    const int a = rng.uniform_int(-2, 2), b = rng.uniform_int(-2, 2);
    const Tensor back = translate2d(translate2d(t, {a, b}), {-a, -b});
    CHECK(back.values() == t.values());
  }
}

TEST_CASE("translate2d composes when content never crosses an edge") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor t = random_interior(10, 10, 3, rng);
    const int uy = rng.uniform_int(-1, 1), ux = rng.uniform_int(-2, 2);
    const int vy = rng.uniform_int(-2, 2), vx = rng.uniform_int(-1, 1);
    const Tensor stepwise = translate2d(translate2d(t, {uy, ux}), {vy, vx});
    const Tensor direct = translate2d(t, {uy + vy, ux + vx});
    CHECK(stepwise.values() == direct.values());
  }
}

TEST_CASE("pad then translate preserves the nonzero multiset") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t({1, 2, 5, 5});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_real(0.1, 1.0);
    const Tensor padded = zero_pad2d(t, 3);
    const int dy = rng.uniform_int(-3, 3), dx = rng.uniform_int(-3, 3);
    const Tensor moved = translate2d(padded, {dy, dx});
    CHECK(sorted_nonzeros(moved) == sorted_nonzeros(padded));
  }
}

TEST_CASE("translate1d shifts with zero fill") {
  const std::vector<double> table_row = {0, 0, 0, 0, 1, 2, 0, 0, 0, 0};
  CHECK(translate1d(table_row, 1) == std::vector<double>{0, 0, 0, 0, 0, 1, 2, 0, 0, 0});
  CHECK(translate1d(table_row, 0) == table_row);

  std::vector<double> edge(10, 0.0);
  edge[0] = 1.0;
  CHECK(translate1d(edge, -1) == std::vector<double>(10, 0.0));
}
