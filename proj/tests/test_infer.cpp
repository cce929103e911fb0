#include <cmath>
#include <fstream>

#include "doctest.h"
#include "test_helpers.hpp"
#include "wtalc/infer.hpp"
#include "wtalc/loss.hpp"

using namespace wtalc;
using wtalc::testing::random_sequence;
using wtalc::testing::scratch_dir;

namespace {

Sequence one_row(const std::vector<double>& values) {
  Sequence s(1, values.size());
  for (std::size_t t = 0; t < values.size(); ++t) s(0, t) = values[t];
  return s;
}

}  // namespace

TEST_CASE("a run above threshold becomes one interval in seconds") {
  const Sequence a = one_row({-1, -1, 2, 2, -1});
  const Vector scores{1.0};
  const auto d = detections_from_activations(a, scores, 0.4, 2.0, {});
  REQUIRE(d.size() == 1);
  CHECK(d[0].start == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(d[0].end == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(d[0].class_index == 0);
  CHECK(d[0].confidence == 2.0);
}

TEST_CASE("runs are maximal, disjoint, sorted and clipped to the duration") {
  const Sequence a = one_row({3, 1, -2, 0.5, 0.0, 4, 2});
  const auto d = detections_from_activations(a, Vector{1.0}, 1.0, 6.5, {});
  REQUIRE(d.size() == 3);
  CHECK(d[0].start == 0.0);
  CHECK(d[0].end == 2.0);
  CHECK(d[0].confidence == 2.0);
  CHECK(d[1].start == 3.0);
  CHECK(d[1].end == 4.0);  // the instant at exactly the threshold is excluded
  CHECK(d[2].start == 5.0);
  CHECK(d[2].end == 6.5);
  CHECK(d[2].confidence == 3.0);
}

TEST_CASE("nothing above threshold, or a class score at or below zero, gives no detections") {
  const Sequence a = one_row({-1, -2, -0.5});
  CHECK(detections_from_activations(a, Vector{1.0}, 1.0, 3.0, {}).empty());

  const Sequence b = one_row({5, 5, 5});
  CHECK(detections_from_activations(b, Vector{0.0}, 1.0, 3.0, {}).empty());
  CHECK(detections_from_activations(b, Vector{-2.0}, 1.0, 3.0, {}).empty());
  LocalizeOptions high;
  high.act_threshold = 100.0;
  CHECK(detections_from_activations(b, Vector{1.0}, 1.0, 3.0, high).empty());
}

TEST_CASE("appending sub-threshold padding leaves intervals unchanged") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Sequence a = random_sequence(3, 12, rng);
    Sequence padded(3, 15, -1.0);
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t c = 0; c < 3; ++c) padded(c, t) = a(c, t);
    const Vector scores{1, 1, 1};
    const auto x = detections_from_activations(a, scores, 0.5, 6.0, {});
    const auto y = detections_from_activations(padded, scores, 0.5, 7.5, {});
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].start == y[i].start);
      CHECK(x[i].end == y[i].end);
      CHECK(x[i].class_index == y[i].class_index);
      CHECK(x[i].confidence == y[i].confidence);
    }
    // Every covered instant is above threshold.
    for (const Detection& d : x) {
      for (auto t = static_cast<std::size_t>(std::lround(d.start / 0.5)); t * 0.5 < d.end; ++t) CHECK(a(d.class_index, t) > 0.0);
    }
  }
}

TEST_CASE("classification") {
  Rng rng(4);
  const ModelDims dims{3, 8, 4};

  SUBCASE("zero parameters give a uniform pmf") {
    const Vector p = classify(ModelParams::zeros(dims), random_sequence(6, 9, rng), 8);
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("pmfs sum to one") {
    const ModelParams params = init_params(dims, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector p = classify(params, random_sequence(6, 5 + trial, rng, 3.0), 8);
      double s = 0.0;
      for (double v : p) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
  SUBCASE("a strong input along one class's direction wins") {
    // Identity-like weights: hidden unit c copies input c, class c reads hidden unit c.
    ModelParams p = ModelParams::zeros(ModelDims{2, 4, 4});
    for (std::size_t c = 0; c < 4; ++c) {
      p.fc_weight(c, c) = 1.0;
      p.cls_weight(c, c) = 1.0;
    }
    Sequence x(4, 16, 0.0);
    for (std::size_t t = 5; t < 9; ++t) x(2, t) = 10.0;
    const Vector pmf = classify(p, x, 8);
    CHECK(std::max_element(pmf.begin(), pmf.end()) - pmf.begin() == 2);
  }
}

TEST_CASE("localize runs both stages on the model output") {
  ModelParams p = ModelParams::zeros(ModelDims{1, 2, 2});
  p.fc_weight(0, 0) = 1.0;
  p.fc_weight(1, 1) = 1.0;
  p.cls_weight(0, 0) = 1.0;
  p.cls_weight(1, 1) = 1.0;
  p.cls_bias = {-0.5, -0.5};
  Sequence x(2, 8, 0.0);
  for (std::size_t t = 2; t < 5; ++t) x(0, t) = 2.0;
  const auto d = localize(p, x, 8, 1.0, 8.0, {});
  REQUIRE(d.size() == 1);  // class 1 never rises above its negative bias
  CHECK(d[0].class_index == 0);
  CHECK(d[0].start == 2.0);
  CHECK(d[0].end == 5.0);
  CHECK(d[0].confidence == 1.5);
}

TEST_CASE("detection files use six decimals") {
  const LabelVocabulary v({"jump", "run"});
  const std::vector<VideoDetection> dets{{"vid", {0.8, 1.6, 1, 2.0}}, {"vid", {0.0, 1.0 / 3.0, 0, -0.25}}};
  CHECK(format_detection(dets[0], v) == "vid 0.800000 1.600000 run 2.000000");
  const auto dir = scratch_dir("infer_write");
  write_detections(dir / "d.txt", dets, v);
  std::ifstream in(dir / "d.txt");
  std::string a, b;
  std::getline(in, a);
  std::getline(in, b);
  CHECK(a == "vid 0.800000 1.600000 run 2.000000");
  CHECK(b == "vid 0.000000 0.333333 jump -0.250000");
}
