#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "shiftlab/layers.hpp"
#include "shiftlab/reference.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/signal.hpp"
#include "shiftlab/tensor.hpp"

using namespace shiftlab;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_real(lo, hi);
  return t;
}

void check_close(const Tensor& a, const Tensor& b, double tol = 1e-12) {
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
  }
}

// content restricted to the central region, margin cells of zeros around it
Tensor interior_batch(std::size_t b, std::size_t c, std::size_t hw, std::size_t margin,
                      Rng& rng) {
  Tensor t({b, c, hw, hw});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t y = margin; y < hw - margin; ++y)
        for (std::size_t x = margin; x < hw - margin; ++x)
          t.at4(bi, ci, y, x) = rng.uniform_real(0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("output_width evaluates the layer width formula") {
  CHECK(output_width(40, 2, 0, 2) == 20);
  CHECK(output_width(40, 3, 1, 1) == 40);
  CHECK(output_width(52, 5, 2, 2) == 26);
  CHECK_THROWS_AS(output_width(3, 8, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(output_width(10, 3, 1, 0), std::invalid_argument);
}

TEST_CASE("default_padding compensates kernel extent only") {
  CHECK(default_padding(3) == 1);
  CHECK(default_padding(2) == 0);
  CHECK(default_padding(5) == 2);
  CHECK(default_padding(1) == 0);
}

TEST_CASE("conv2d identity kernel") {
  Rng rng(7);
  const Tensor x = random_tensor({1, 1, 3, 3}, rng);
  Tensor w({1, 1, 1, 1});
  w[0] = 1.0;
  const Tensor out = conv2d(x, w, Tensor({1}), 1, 0);
  CHECK(out.values() == x.values());
}

TEST_CASE("conv2d reproduces the strided 1-d filtering row") {
  // the 1-d signal embedded in the middle row; kernel holds [1,0,1] in its
  // middle row and zeros elsewhere
  const Signal1D signal = {0, 0, 0, 0, 1, 2, 0, 0, 0, 0};
  Tensor x({1, 1, 3, 10});
  for (std::size_t i = 0; i < 10; ++i) x.at4(0, 0, 1, i) = signal[i];
  Tensor w({1, 1, 3, 3});
  w.at4(0, 0, 1, 0) = 1.0;
  w.at4(0, 0, 1, 2) = 1.0;
  const Tensor out = conv2d(x, w, Tensor({1}), 2, 0);
  CHECK(out.shape() == std::vector<std::size_t>{1, 1, 1, 4});
  CHECK(out.values() == std::vector<double>{0, 1, 1, 0});
}

TEST_CASE("conv2d matches the serial loop-nest reference") {
  Rng rng(17);
  SUBCASE("dense") {
    const Tensor x = random_tensor({1, 2, 5, 5}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    check_close(conv2d(x, w, b, 1, 1), reference::conv2d(x, w, b, 1, 1));
  }
  SUBCASE("strided, no padding") {
    const Tensor x = random_tensor({2, 3, 8, 8}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = random_tensor({4}, rng);
    check_close(conv2d(x, w, b, 2, 0), reference::conv2d(x, w, b, 2, 0));
  }
  SUBCASE("large padding") {
    const Tensor x = random_tensor({1, 1, 4, 4}, rng);
    const Tensor w = random_tensor({2, 1, 5, 5}, rng);
    const Tensor b = random_tensor({2}, rng);
    check_close(conv2d(x, w, b, 1, 2), reference::conv2d(x, w, b, 1, 2));
  }
}

TEST_CASE("conv2d rejects inconsistent shapes") {
  Rng rng(19);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = random_tensor({3, 4, 3, 3}, rng);  // channel mismatch
  CHECK_THROWS_AS(conv2d(x, w, Tensor({3}), 1, 1), std::invalid_argument);
  const Tensor w_ok = random_tensor({3, 2, 3, 3}, rng);
  CHECK_THROWS_AS(conv2d(x, w_ok, Tensor({3}), 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, w_ok, Tensor({2}), 1, 1), std::invalid_argument);
}

TEST_CASE("maxpool2d windows") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(maxpool2d(x, 2, 2, 0).values() == std::vector<double>{4});

  Tensor c({1, 2, 4, 4});
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.75;
  const Tensor pooled = maxpool2d(c, 2, 2, 0);
  CHECK(pooled.shape() == std::vector<std::size_t>{1, 2, 2, 2});
  for (std::size_t i = 0; i < pooled.size(); ++i) CHECK(pooled[i] == 0.75);

  Rng rng(23);
  const Tensor r = random_tensor({2, 2, 6, 6}, rng);
  check_close(maxpool2d(r, 3, 1, 1), reference::maxpool2d(r, 3, 1, 1));
  CHECK(maxpool2d(r, 1, 1, 0).values() == r.values());
  CHECK_THROWS_AS(maxpool2d(r, 9, 1, 1), std::invalid_argument);
}

TEST_CASE("avgpool2d windows") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(avgpool2d(x, 2, 2, 0).values() == std::vector<double>{2.5});

  Tensor c({1, 1, 4, 4});
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.25;
  const Tensor pooled = avgpool2d(c, 2, 2, 0);
  for (std::size_t i = 0; i < pooled.size(); ++i) CHECK(pooled[i] == doctest::Approx(1.25));

  Rng rng(27);
  const Tensor r = random_tensor({2, 2, 6, 6}, rng);
  check_close(avgpool2d(r, 3, 1, 1), reference::avgpool2d(r, 3, 1, 1));
  CHECK(avgpool2d(r, 1, 1, 0).values() == r.values());
}

TEST_CASE("blur kernel is normalized and separable") {
  const auto& taps = binomial5();
  double sum2d = 0.0;
  for (double ty : taps)
    for (double tx : taps) sum2d += ty * tx;
  CHECK(sum2d == 1.0);
}

TEST_CASE("blur_downsample2d keeps constants on interior cells") {
  Tensor c({1, 2, 9, 9});
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.375;
  for (std::size_t stride : {1UL, 2UL}) {
    const Tensor blurred = blur_downsample2d(c, stride);
    // interior output cells: the 5x5 window never touches the zero padding
    const std::size_t lo = (2 + stride - 1) / stride;
    for (std::size_t c_i = 0; c_i < 2; ++c_i)
      for (std::size_t y = lo; y * stride + 2 < 9; ++y)
        for (std::size_t x = lo; x * stride + 2 < 9; ++x)
          CHECK(blurred.at4(0, c_i, y, x) == doctest::Approx(0.375).epsilon(1e-14));
  }
}

TEST_CASE("blur then stride 2 flattens an alternating signal") {
  // rows all equal to an alternating sequence; after the binomial blur every
  // interior sample is (a + b) / 2, so stride-2 sampling sees a constant
  const double a = 0.2, b = 0.8;
  Tensor x({1, 1, 7, 16});
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t i = 0; i < 16; ++i) x.at4(0, 0, y, i) = (i % 2 == 0) ? a : b;
  const Tensor out = blur_downsample2d(x, 2);
  for (std::size_t ox = 1; ox * 2 + 2 < 16; ++ox) {
    CHECK(out.at4(0, 0, 2, ox) == doctest::Approx((a + b) / 2).epsilon(1e-12));
  }
}

TEST_CASE("blur_downsample2d stride 1 preserves shape") {
  Rng rng(31);
  const Tensor x = random_tensor({2, 3, 8, 8}, rng);
  CHECK(blur_downsample2d(x, 1).shape() == x.shape());
  check_close(blur_downsample2d(x, 2), reference::blur_downsample2d(x, 2));
}

TEST_CASE("blurring lowers the aligned-window variance of noisy rows") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({1, 1, 5, 32});
    Signal1D row(32);
    for (double& v : row) v = rng.uniform_real(0.0, 1.0);
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t i = 0; i < 32; ++i) x.at4(0, 0, y, i) = row[i];
    const Tensor blurred = blur_downsample2d(x, 1);
    Signal1D mid(30), orig(30);
    for (std::size_t i = 0; i < 30; ++i) {
      mid[i] = blurred.at4(0, 0, 2, i + 1);  // interior columns only
      orig[i] = row[i + 1];
    }
    CHECK(local_homogeneity(mid, 2) < local_homogeneity(orig, 2));
  }
}

TEST_CASE("global_avg_pool") {
  Tensor c({2, 3, 4, 4});
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.6;
  const Tensor pooled = global_avg_pool(c);
  CHECK(pooled.shape() == std::vector<std::size_t>{2, 3});
  for (std::size_t i = 0; i < pooled.size(); ++i) CHECK(pooled[i] == doctest::Approx(0.6));

  Tensor single({1, 1, 5, 8});
  single.at4(0, 0, 2, 3) = 2.0;
  CHECK(global_avg_pool(single).values() == std::vector<double>{2.0 / 40.0});

  Rng rng(41);
  const Tensor x = interior_batch(1, 2, 8, 3, rng);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      const Tensor moved = global_avg_pool(translate2d(x, {dy, dx}));
      CHECK(moved.values() == global_avg_pool(x).values());
    }
}

TEST_CASE("dense affine map") {
  Rng rng(43);
  const Tensor x = random_tensor({3, 4}, rng);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at2(i, i) = 1.0;
  CHECK(dense(x, eye, Tensor({4})).values() == x.values());

  const Tensor zero_w({4, 2});
  Tensor b({2}, {0.5, -1.5});
  const Tensor out = dense(x, zero_w, b);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(out.at2(r, 0) == 0.5);
    CHECK(out.at2(r, 1) == -1.5);
  }

  const Tensor w = random_tensor({4, 5}, rng);
  const Tensor bias = random_tensor({5}, rng);
  check_close(dense(x, w, bias), reference::dense(x, w, bias));
  CHECK_THROWS_AS(dense(x, random_tensor({3, 5}, rng), bias), std::invalid_argument);
}

TEST_CASE("relu") {
  Tensor x({1, 3}, {-1.0, 0.0, 2.0});
  CHECK(relu(x).values() == std::vector<double>{0.0, 0.0, 2.0});
  Tensor neg({2, 2}, {-1, -2, -3, -4});
  CHECK(relu(neg).values() == std::vector<double>(4, 0.0));
  Rng rng(47);
  const Tensor r = random_tensor({2, 3, 4, 4}, rng);
  CHECK(relu(relu(r)).values() == relu(r).values());
}

TEST_CASE("softmax_cross_entropy") {
  SUBCASE("uniform logits give ln C") {
    Tensor logits({2, 10});
    const SoftmaxLoss sm = softmax_cross_entropy(logits, {3, 7});
    CHECK(sm.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }
  SUBCASE("huge logits stay finite") {
    Tensor logits({1, 2}, {1000.0, 0.0});
    const SoftmaxLoss sm = softmax_cross_entropy(logits, {0});
    CHECK(std::isfinite(sm.loss));
    CHECK(sm.loss == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("rows sum to one") {
    Rng rng(53);
    const Tensor logits = random_tensor({8, 5}, rng, -30.0, 30.0);
    const SoftmaxLoss sm = softmax_cross_entropy(logits, {0, 1, 2, 3, 4, 0, 1, 2});
    for (std::size_t r = 0; r < 8; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 5; ++c) sum += sm.probabilities.at2(r, c);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("matches a long-double oracle") {
    Rng rng(59);
    const Tensor logits = random_tensor({6, 4}, rng, -5.0, 5.0);
    const std::vector<int> labels = {1, 0, 3, 2, 1, 0};
    const SoftmaxLoss sm = softmax_cross_entropy(logits, labels);
    long double total = 0.0L;
    for (std::size_t r = 0; r < 6; ++r) {
      long double z = 0.0L;
      for (std::size_t c = 0; c < 4; ++c) z += expl(static_cast<long double>(logits.at2(r, c)));
      total += -(static_cast<long double>(logits.at2(r, static_cast<std::size_t>(labels[r]))) -
                 logl(z));
    }
    CHECK(sm.loss == doctest::Approx(static_cast<double>(total / 6.0L)).epsilon(1e-10));
  }
  SUBCASE("rejects out-of-range labels") {
    Tensor logits({1, 3});
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {3}), std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1}), std::invalid_argument);
  }
}

TEST_CASE("complexity_estimate sums the conv layer cost terms") {
  NetworkSpec spec;
  spec.in_channels = 1;
  spec.in_height = 40;
  spec.in_width = 40;
  spec.class_count = 10;
  spec.layers = {conv_layer(8, 3, 1), relu_layer(), dense_layer(10)};
  CHECK(complexity_estimate(spec) == 1ull * 9 * 8 * 40 * 40);

  NetworkSpec empty;
  empty.in_channels = 1;
  empty.in_height = 8;
  empty.in_width = 8;
  CHECK(complexity_estimate(empty) == 0);
}

TEST_CASE("doubling an intermediate stride lowers downstream cost") {
  auto three_layer = [](std::size_t first_stride) {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_height = 40;
    spec.in_width = 40;
    spec.class_count = 10;
    spec.layers = {conv_layer(8, 3, first_stride), relu_layer(), conv_layer(16, 3, 1),
                   relu_layer(), conv_layer(32, 3, 1), relu_layer(), dense_layer(10)};
    return spec;
  };
  CHECK(complexity_estimate(three_layer(2)) < complexity_estimate(three_layer(1)));
}

TEST_CASE("forward shapes follow the width formula chain") {
  NetworkSpec spec;
  spec.in_channels = 2;
  spec.in_height = 16;
  spec.in_width = 16;
  spec.class_count = 4;
  spec.layers = {conv_layer(3, 3, 1), relu_layer(), maxpool_layer(2, 2), conv_layer(5, 3, 2),
                 relu_layer(), avgpool_layer(3, 1), blurpool_layer(2), gap_layer(),
                 dense_layer(4)};
  const auto chain = spec.shape_chain();
  CHECK(chain[1].height == 16);   // conv, padded
  CHECK(chain[3].height == 8);    // maxpool stride 2
  CHECK(chain[4].height == 4);    // conv stride 2
  CHECK(chain[6].height == 4);    // avgpool stride 1, padded
  CHECK(chain[7].height == 2);    // blur stride 2
  CHECK(chain[8].features() == 5);
  CHECK(chain.back().features() == 4);
  spec.validate();

  NetworkSpec bad = spec;
  bad.layers[8] = dense_layer(7);
  CHECK_THROWS_WITH_AS(bad.validate(),
                       "NetworkSpec: final output length 7 does not equal class count 4",
                       std::invalid_argument);
}

TEST_CASE("stride-1 layers with width-preserving padding are equivariant") {
  Rng rng(61);
  for (int trial = 0; trial < 60; ++trial) {
    const Tensor x = interior_batch(1, 1, 12, 4, rng);
    const Tensor w = random_tensor({2, 1, 3, 3}, rng);
    // a bias would lift the resting level of the whole map, which the
    // zero-filling translation cannot represent at the canvas border
    const Tensor b = Tensor({2});
    const int dy = rng.uniform_int(-2, 2), dx = rng.uniform_int(-2, 2);

    const Tensor a1 = relu(conv2d(translate2d(x, {dy, dx}), w, b, 1, 1));
    const Tensor a2 = translate2d(relu(conv2d(x, w, b, 1, 1)), {dy, dx});
    CHECK(a1.values() == a2.values());

    const Tensor p1 = maxpool2d(translate2d(x, {dy, dx}), 2, 1, 0);
    const Tensor p2 = translate2d(maxpool2d(x, 2, 1, 0), {dy, dx});
    CHECK(p1.values() == p2.values());

    const Tensor v1 = avgpool2d(translate2d(x, {dy, dx}), 3, 1, 1);
    const Tensor v2 = translate2d(avgpool2d(x, 3, 1, 1), {dy, dx});
    CHECK(v1.values() == v2.values());
  }
}

TEST_CASE("stride-s layers are shiftable for stride multiples") {
  Rng rng(67);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t s = trial % 2 == 0 ? 2 : 4;
    const Tensor x = interior_batch(1, 1, 16, 6, rng);
    const int vy = rng.uniform_int(-1, 1), vx = rng.uniform_int(-1, 1);
    const Translation input_shift{static_cast<int>(s) * vy, static_cast<int>(s) * vx};

    const Tensor m1 = maxpool2d(translate2d(x, input_shift), 2, s, 0);
    const Tensor m2 = translate2d(maxpool2d(x, 2, s, 0), {vy, vx});
    CHECK(m1.values() == m2.values());

    const Tensor w = random_tensor({2, 1, 3, 3}, rng);
    const Tensor b = Tensor({2});
    const Tensor c1 = conv2d(translate2d(x, input_shift), w, b, s, 1);
    const Tensor c2 = translate2d(conv2d(x, w, b, s, 1), {vy, vx});
    CHECK(c1.values() == c2.values());
  }
}
