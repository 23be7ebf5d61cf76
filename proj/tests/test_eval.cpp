#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "shiftlab/eval.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/synth.hpp"
#include "shiftlab/train.hpp"

using namespace shiftlab;

namespace {

// one-pixel images, dense head: predictions fully controlled by the weights
struct TinyNet {
  NetworkSpec spec;
  ParameterSet params;
};

TinyNet pixel_net(double w0, double w1) {
  TinyNet net;
  net.spec.in_channels = 1;
  net.spec.in_height = 1;
  net.spec.in_width = 1;
  net.spec.class_count = 2;
  net.spec.layers = {dense_layer(2)};
  net.params.add(weight_name(0), Tensor({1, 2}, {w0, w1}));
  net.params.add(bias_name(0), Tensor({2}));
  return net;
}

}  // namespace

TEST_CASE("cosine similarity") {
  CHECK(*mean_cosine_similarity({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*mean_cosine_similarity({1, 0}, {0, 1}) == 0.0);
  CHECK(*mean_cosine_similarity({1, 1}, {1, 0}) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK_FALSE(mean_cosine_similarity({0, 0}, {1, 2}).has_value());
  CHECK_FALSE(mean_cosine_similarity({1, 2}, {0, 0}).has_value());
  CHECK_THROWS_AS(mean_cosine_similarity({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("ptop1 counts argmax changes") {
  Tensor a({3, 2}, {1, 0, 0, 1, 1, 0});
  Tensor b({3, 2}, {1, 0, 0, 1, 1, 0});
  CHECK(ptop1(a, a) == 0.0);
  Tensor flipped({3, 2}, {0, 1, 1, 0, 0, 1});
  CHECK(ptop1(a, flipped) == 1.0);
  Tensor one_change({3, 2}, {1, 0, 1, 0, 1, 0});
  CHECK(ptop1(a, one_change) == doctest::Approx(1.0 / 3.0));

  // argmax ties resolve to the lowest class index on both sides
  Tensor tie({1, 3}, {0.5, 0.5, 0.1});
  CHECK(ptop1(tie, tie) == 0.0);
  CHECK_THROWS_AS(ptop1(a, Tensor({2, 2})), std::invalid_argument);
}

TEST_CASE("common_correct_filter intersects correct predictions") {
  // labels follow the pixel sign: class 1 when the pixel is positive
  LabeledImages test;
  test.images = Tensor({4, 1, 1, 1}, {1.0, -1.0, 1.0, -1.0});
  test.labels = {1, 0, 1, 0};

  const TinyNet right = pixel_net(-1.0, 1.0);  // classifies every sample correctly
  const TinyNet wrong = pixel_net(1.0, -1.0);  // classifies every sample incorrectly

  std::vector<Model> both = {{&right.spec, &right.params, 1, "right"},
                             {&wrong.spec, &wrong.params, 1, "wrong"}};
  CHECK(common_correct_filter({both[0]}, test).size() == 4);
  CHECK(common_correct_filter({both[1]}, test).empty());
  CHECK(common_correct_filter(both, test).empty());

  const std::vector<std::size_t> indices = common_correct_filter({both[0]}, test);
  CHECK(indices == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("aggregate_over_seeds computes mean and standard error") {
  const Aggregate agg = aggregate_over_seeds({0.5, 0.7, 0.9});
  CHECK(agg.mean == doctest::Approx(0.7));
  // sample stddev = 0.2, SE = 0.2 / sqrt(3)
  CHECK(agg.stderr_ == doctest::Approx(0.2 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(aggregate_over_seeds({0.4}).stderr_ == 0.0);
  CHECK(aggregate_over_seeds({}).mean == 0.0);
}

namespace {

struct EvalFixture {
  NetworkSpec spec;
  ParameterSet params;
  LabeledImages test;
  std::vector<std::size_t> all_indices;

  explicit EvalFixture(std::uint64_t seed, double scale = 1.0) {
    spec.in_channels = 1;
    spec.in_height = 12;
    spec.in_width = 12;
    spec.class_count = 3;
    spec.layers = {conv_layer(2, 3, 1), relu_layer(), maxpool_layer(2, 2), dense_layer(3)};
    params = init_parameters(spec, seed);
    if (scale != 1.0) {
      for (const std::string& name : params.order()) {
        Tensor& t = params.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= scale;
      }
    }
    const LabeledImages raw = synth::make_glyphs(12, 77);
    // shrink the glyphs onto a 12x12 canvas by cropping the central region
    test.images = Tensor({12, 1, 12, 12});
    test.labels = raw.labels;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x)
          test.images.at4(i, 0, y, x) = raw.images.at4(i, 0, y + 8, x + 8);
    for (std::size_t i = 0; i < 12; ++i) all_indices.push_back(i);
  }
};

}  // namespace

TEST_CASE("evaluate_invariance at range 0 gives perfect scores") {
  EvalFixture fx(4);
  EvalProtocol protocol;
  protocol.max_shift_range = 0;
  protocol.sample_count = 12;
  const std::vector<Model> models = {{&fx.spec, &fx.params, 1, "net"}};
  const InvarianceReport report =
      evaluate_invariance(fx.spec, models, fx.test, fx.all_indices, protocol, 4);
  CHECK(report.mcs_mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.ptop1_mean == 0.0);
  CHECK(report.per_seed.size() == 1);
  CHECK(report.per_seed[0].pairs == 12);
}

TEST_CASE("evaluate_invariance rejects ranges beyond the margin") {
  EvalFixture fx(4);
  EvalProtocol protocol;
  protocol.max_shift_range = 5;
  const std::vector<Model> models = {{&fx.spec, &fx.params, 1, "net"}};
  CHECK_THROWS_AS(evaluate_invariance(fx.spec, models, fx.test, fx.all_indices, protocol, 4),
                  std::invalid_argument);
}

TEST_CASE("evaluate_invariance is deterministic per eval seed") {
  EvalFixture fx(4);
  EvalProtocol protocol;
  protocol.max_shift_range = 2;
  protocol.sample_count = 12;
  protocol.per_sample_draws = 3;
  const std::vector<Model> models = {{&fx.spec, &fx.params, 1, "net"}};
  const InvarianceReport a =
      evaluate_invariance(fx.spec, models, fx.test, fx.all_indices, protocol, 4);
  const InvarianceReport b =
      evaluate_invariance(fx.spec, models, fx.test, fx.all_indices, protocol, 4);
  CHECK(a.per_seed[0].mcs == b.per_seed[0].mcs);
  CHECK(a.per_seed[0].ptop1 == b.per_seed[0].ptop1);
  CHECK(a.per_seed[0].pairs == 36);
}

TEST_CASE("metrics ignore a positive rescaling of the outputs") {
  EvalFixture base(4);
  EvalProtocol protocol;
  protocol.max_shift_range = 2;
  protocol.sample_count = 12;

  // scaling only the head scales every logit by the same positive factor
  ParameterSet scaled = base.params;
  {
    Tensor& w = scaled.at(weight_name(3));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= 7.5;
    Tensor& b = scaled.at(bias_name(3));
    for (std::size_t i = 0; i < b.size(); ++i) b[i] *= 7.5;
  }
  const std::vector<Model> m1 = {{&base.spec, &base.params, 1, "net"}};
  const std::vector<Model> m2 = {{&base.spec, &scaled, 1, "net"}};
  const InvarianceReport r1 =
      evaluate_invariance(base.spec, m1, base.test, base.all_indices, protocol, 4);
  const InvarianceReport r2 =
      evaluate_invariance(base.spec, m2, base.test, base.all_indices, protocol, 4);
  CHECK(r1.mcs_mean == doctest::Approx(r2.mcs_mean).epsilon(1e-9));
  CHECK(r1.ptop1_mean == r2.ptop1_mean);
}

TEST_CASE("a stride-1 GAP head network scores perfect invariance") {
  NetworkSpec spec;
  spec.in_channels = 1;
  spec.in_height = 20;
  spec.in_width = 20;
  spec.class_count = 3;
  spec.layers = {conv_layer(2, 3, 1), relu_layer(), maxpool_layer(2, 1), gap_layer(),
                 dense_layer(3)};
  const ParameterSet params = init_parameters(spec, 17);

  // content confined to the central 8x8 so a 4-pixel shift plus the network's
  // two cells of support growth never touch the canvas edge
  Rng rng(5);
  LabeledImages test;
  test.images = Tensor({6, 1, 20, 20});
  test.labels.assign(6, 0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t y = 6; y < 14; ++y)
      for (std::size_t x = 6; x < 14; ++x) test.images.at4(i, 0, y, x) = rng.uniform01();

  EvalProtocol protocol;
  protocol.max_shift_range = 4;
  protocol.sample_count = 6;
  protocol.per_sample_draws = 4;
  std::vector<std::size_t> indices = {0, 1, 2, 3, 4, 5};
  const std::vector<Model> models = {{&spec, &params, 1, "gap"}};
  const InvarianceReport report =
      evaluate_invariance(spec, models, test, indices, protocol, 6);
  CHECK(report.ptop1_mean == 0.0);
  CHECK(report.mcs_mean >= 1.0 - 1e-9);
  CHECK(report.per_seed[0].excluded == 0);
}
