#include <cmath>
#include <fstream>

#include "doctest.h"
#include "test_helpers.hpp"
#include "wtalc/errors.hpp"
#include "wtalc/optim.hpp"
#include "wtalc/synth.hpp"

using namespace wtalc;
using wtalc::testing::scratch_dir;

namespace {

ModelParams filled_params(const ModelDims& dims, double value) {
  ModelParams p = ModelParams::zeros(dims);
  for (auto block : p.blocks())
    for (double& v : block) v = value;
  return p;
}

// A small synthetic training set, generated once per process.
const Dataset& small_dataset() {
  static const Dataset d = [] {
    SynthConfig cfg;
    cfg.num_classes = 3;
    cfg.num_train = 16;
    cfg.num_test = 0;
    cfg.feature_dim = 6;
    cfg.mean_length = 20;
    const auto out = synth_generate(cfg, scratch_dir("optim_synth"));
    return load_dataset(load_manifest(out.manifest, out.features_dir).filter(Split::kTrain));
  }();
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.feature_dim = 6;
  c.hidden_dim = 16;
  c.iterations = 20;
  c.batch_size = 6;
  c.min_pairs = 2;
  return c;
}

}  // namespace

TEST_CASE("the first Adam step moves every weight by the learning rate against its gradient") {
  const ModelDims dims{2, 3, 2};
  ModelParams p = filled_params(dims, 1.0);
  ModelParams g = ModelParams::zeros(dims);
  double sign = 1.0;
  for (auto block : g.blocks())
    for (double& v : block) {
      v = sign * 0.25;
      sign = -sign;
    }
  AdamState s = AdamState::for_params(p);
  adam_step(p, g, s, 1e-3);
  CHECK(s.step == 1);
  for (std::size_t b = 0; b < 4; ++b) {
    const auto pb = p.blocks()[b];
    const auto gb = g.blocks()[b];
    for (std::size_t i = 0; i < pb.size(); ++i) {
      const double want = 1.0 - 1e-3 * (gb[i] > 0 ? 1.0 : -1.0);
      CHECK(pb[i] == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("Adam with zero gradients leaves parameters unchanged") {
  const ModelDims dims{2, 3, 2};
  ModelParams p = filled_params(dims, 0.5);
  const ModelParams before = p;
  AdamState s = AdamState::for_params(p);
  for (int i = 0; i < 5; ++i) adam_step(p, ModelParams::zeros(dims), s, 1e-2);
  CHECK(p == before);
}

TEST_CASE("Adam rejects non-finite gradients and mismatched shapes") {
  const ModelDims dims{2, 3, 2};
  ModelParams p = filled_params(dims, 0.5);
  ModelParams g = ModelParams::zeros(dims);
  g.cls_bias[1] = std::nan("");
  AdamState s = AdamState::for_params(p);
  CHECK_THROWS_AS(adam_step(p, g, s, 1e-3), DomainError);
  CHECK_THROWS_AS(adam_step(p, ModelParams::zeros(ModelDims{2, 4, 2}), s, 1e-3), ShapeError);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  auto invalid = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.lambda = 1.1; }).validate(), DomainError);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.alpha = -1; }).validate(), DomainError);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.keep_prob = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.learning_rate = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.k_divisor = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(invalid([](TrainConfig& c) { c.batch_size = 4; }).validate(), DomainError);  // < 2 * min_pairs
}

TEST_CASE("training is deterministic for a seed") {
  const TrainConfig c = small_config();
  const TrainResult a = train(small_dataset(), c);
  const TrainResult b = train(small_dataset(), c);
  CHECK(a.params == b.params);
  REQUIRE(a.log.size() == 20);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss.total == b.log[i].loss.total);

  TrainConfig other = c;
  other.seed = 1;
  CHECK_FALSE(train(small_dataset(), other).params == a.params);
}

TEST_CASE("training with zero iterations returns the initial parameters") {
  TrainConfig c = small_config();
  c.iterations = 0;
  const TrainResult r = train(small_dataset(), c);
  CHECK(r.log.empty());
  TrainConfig longer = c;
  longer.iterations = 1;
  const TrainResult one = train(small_dataset(), longer);
  CHECK(one.log.size() == 1);
  CHECK_FALSE(one.params == r.params);
  CHECK(r.params.dims == ModelDims{6, 16, 3});
}

TEST_CASE("training logs and pairs") {
  TrainConfig c = small_config();
  std::size_t calls = 0;
  const TrainResult r = train(small_dataset(), c, [&](const LogRecord& rec) {
    ++calls;
    CHECK(rec.step == calls);
  });
  CHECK(calls == c.iterations);
  for (const LogRecord& rec : r.log) {
    CHECK(rec.pair_count >= c.min_pairs);
    CHECK(rec.casl_has_pairs);
    CHECK(std::abs(rec.loss.total - (0.5 * rec.loss.mill + 0.5 * rec.loss.casl + rec.loss.reg)) <= 1e-12);
  }

  SUBCASE("pure MIL keeps the CASL term out of the total") {
    c.lambda = 1.0;
    for (const LogRecord& rec : train(small_dataset(), c).log)
      CHECK(rec.loss.total == doctest::Approx(rec.loss.mill + rec.loss.reg).epsilon(1e-14));
  }
  SUBCASE("the log file has one JSON object per step") {
    const auto dir = scratch_dir("optim_log");
    write_training_log(dir / "log.jsonl", r.log);
    std::ifstream in(dir / "log.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
      CHECK(line.front() == '{');
      CHECK(line.find("\"total\"") != std::string::npos);
      ++lines;
    }
    CHECK(lines == r.log.size());
  }
}

TEST_CASE("the MIL loss falls over training on separable data") {
  TrainConfig c = small_config();
  c.iterations = 150;
  c.learning_rate = 1e-3;
  c.keep_prob = 1.0;
  const TrainResult r = train(small_dataset(), c);
  auto window_mean = [&](std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += r.log[i].loss.mill;
    return s / static_cast<double>(to - from);
  };
  CHECK(window_mean(130, 150) < window_mean(0, 20));
}

TEST_CASE("training rejects data that cannot form pairs") {
  Dataset d = small_dataset();
  for (std::size_t i = 0; i < d.index.records.size(); ++i) d.index.records[i].labels = {i % 3};
  // Keep only one video per class.
  d.index.records.resize(3);
  d.features.resize(3);
  TrainConfig c = small_config();
  c.batch_size = 2;
  c.min_pairs = 1;
  CHECK_THROWS_AS(train(d, c), DegenerateDatasetError);
}

TEST_CASE("gradient check") {
  GradCheckOptions o;
  o.trials = 6;

  SUBCASE("analytic gradients agree with central differences") {
    const GradCheckReport r = grad_check(o);
    CHECK(r.passed);
    CHECK(r.trials.size() == 18);
    for (double e : r.max_rel_error) CHECK(e < 1e-4);
  }
  SUBCASE("pure CASL") {
    o.lambdas = {0.0};
    CHECK(grad_check(o).passed);
  }
  SUBCASE("a sign error in the projection gradient is caught") {
    o.corrupt = [](ModelParams& g) {
      for (double& v : g.cls_weight.flat()) v = -v;
    };
    const GradCheckReport r = grad_check(o);
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error[2] > 1.0);
  }
  SUBCASE("a one-percent error in the hidden bias gradient is caught") {
    o.lambdas = {0.5};
    o.corrupt = [](ModelParams& g) {
      for (double& v : g.fc_bias) v *= 1.01;
    };
    CHECK_FALSE(grad_check(o).passed);
  }
}
