#include "wtalc/optim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "wtalc/errors.hpp"

namespace wtalc {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("invalid training config: " + what); };
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(margin >= 0.0)) fail("margin must be >= 0");
  if (k_divisor < 1) fail("k_divisor must be >= 1");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) fail("keep_prob must lie in (0, 1]");
  if (!(clip_seconds > 0.0)) fail("clip_seconds must be > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (batch_size < 2 * min_pairs) fail("batch_size must be >= 2 * min_pairs");
  if (feature_dim < 1 || hidden_dim < 1) fail("feature_dim and hidden_dim must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
}

AdamState AdamState::for_params(const ModelParams& params, double beta1, double beta2, double epsilon) {
  AdamState s;
  s.first_moment = ModelParams::zeros(params.dims);
  s.second_moment = ModelParams::zeros(params.dims);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate) {
  if (grads.dims != params.dims || state.first_moment.dims != params.dims ||
      state.second_moment.dims != params.dims) {
    throw ShapeError("adam_step: parameter, gradient and state shapes differ");
  }
  for (auto block : grads.blocks()) {
    for (double g : block) {
      if (!std::isfinite(g)) throw DomainError("adam_step: non-finite gradient");
    }
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, step);
  const double correction2 = 1.0 - std::pow(state.beta2, step);
  auto p = params.blocks();
  auto g = grads.blocks();
  auto m = state.first_moment.blocks();
  auto v = state.second_moment.blocks();
  for (std::size_t b = 0; b < p.size(); ++b) {
    for (std::size_t i = 0; i < p[b].size(); ++i) {
      m[b][i] = state.beta1 * m[b][i] + (1.0 - state.beta1) * g[b][i];
      v[b][i] = state.beta2 * v[b][i] + (1.0 - state.beta2) * g[b][i] * g[b][i];
      const double m_hat = m[b][i] / correction1;
      const double v_hat = v[b][i] / correction2;
      p[b][i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

// Independent streams for initialisation, batch sampling and dropout.
Rng stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return Rng(seq);
}

bool all_finite(const ModelParams& p) {
  for (auto block : p.blocks()) {
    for (double v : block) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (dataset.size() == 0) throw DegenerateDatasetError("train: empty dataset");
  if (dataset.input_dim() != 2 * config.feature_dim) {
    throw ShapeError("train: features are " + std::to_string(dataset.input_dim() / 2) +
                     "-dimensional per stream, config says " + std::to_string(config.feature_dim));
  }
  for (const auto& r : dataset.index.records) {
    if (r.labels.empty()) throw DomainError("train: video '" + r.id + "' has no labels");
  }

  Rng init_rng = stream(config.seed, 0);
  Rng batch_rng = stream(config.seed, 1);
  Rng dropout_rng = stream(config.seed, 2);

  const ModelDims dims{config.feature_dim, config.hidden_dim, dataset.index.vocabulary.size()};
  TrainResult result{init_params(dims, init_rng), {}};
  AdamState adam = AdamState::for_params(result.params, config.beta1, config.beta2, config.adam_epsilon);
  const LossWeights weights = config.loss_weights();
  const BatchSpec spec = config.batch_spec();

  for (std::size_t step = 1; step <= config.iterations; ++step) {
    Batch batch = build_batch(dataset, spec, batch_rng);
    std::vector<Sequence> inputs;
    std::vector<LabelSet> labels;
    std::vector<ForwardState> states;
    for (auto& item : batch.items) {
      states.push_back(forward(result.params, item.clip.features, config.keep_prob, Mode::kTrain, dropout_rng));
      inputs.push_back(std::move(item.clip.features));
      labels.push_back(std::move(item.clip.labels));
    }
    Objective obj = evaluate_objective(result.params, inputs, states, labels, weights);
    if (!std::isfinite(obj.loss.total)) throw DivergenceError(step, "non-finite loss");
    if (!all_finite(obj.grad)) throw DivergenceError(step, "non-finite gradient");
    adam_step(result.params, obj.grad, adam, config.learning_rate);
    if (!all_finite(result.params)) throw DivergenceError(step, "non-finite parameters");

    LogRecord rec{step, obj.loss, obj.casl_has_pairs, batch.pair_count};
    result.log.push_back(rec);
    if (on_step) on_step(rec);
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06zu.bin", step);
      std::filesystem::create_directories(config.checkpoint_dir.empty() ? "." : config.checkpoint_dir);
      save_params((config.checkpoint_dir.empty() ? std::filesystem::path(".") : config.checkpoint_dir) / name,
                  result.params, dataset.index.vocabulary);
    }
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<LogRecord>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write training log '" + path.string() + "'");
  for (const auto& r : log) {
    nlohmann::json j{{"step", r.step},         {"mill", r.loss.mill},
                     {"casl", r.loss.casl},    {"reg", r.loss.reg},
                     {"total", r.loss.total},  {"casl_has_pairs", r.casl_has_pairs},
                     {"pair_count", r.pair_count}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

struct GradCheckProblem {
  LossWeights weights;
  ModelParams params;
  std::vector<Sequence> inputs;
  std::vector<Sequence> masks;
  std::vector<LabelSet> labels;
};

template <typename T>
T choose(std::initializer_list<T> options, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return *(options.begin() + static_cast<std::ptrdiff_t>(d(rng)));
}

GradCheckProblem make_problem(double lambda, Rng& rng) {
  GradCheckProblem p;
  const ModelDims dims{choose<std::size_t>({2, 4}, rng), choose<std::size_t>({4, 8}, rng),
                       choose<std::size_t>({2, 3}, rng)};
  p.weights = {lambda, 1e-2, 0.5, choose<std::size_t>({1, 2, 3, 8}, rng)};
  p.params = init_params(dims, rng);
  std::uniform_real_distribution<double> bias(0.0, 0.5);
  for (double& b : p.params.fc_bias) b = bias(rng);
  std::normal_distribution<double> small(0.0, 0.3);
  for (double& b : p.params.cls_bias) b = small(rng);

  std::uniform_int_distribution<std::size_t> batch_dist(3, 5);
  std::uniform_int_distribution<std::size_t> length_dist(2, 12);
  std::uniform_int_distribution<std::size_t> class_dist(0, dims.num_classes - 1);
  std::bernoulli_distribution extra(0.3);
  std::normal_distribution<double> feature(0.0, 1.0);

  const std::size_t batch = batch_dist(rng);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t length = length_dist(rng);
    Sequence x(dims.input_dim(), length);
    for (double& v : x.flat()) v = feature(rng);
    p.inputs.push_back(std::move(x));
    p.masks.push_back(draw_dropout_mask(dims.hidden_dim, length, 0.7, rng));
    LabelSet labels{class_dist(rng)};
    for (std::size_t c = 0; c < dims.num_classes; ++c) {
      if (extra(rng)) labels.push_back(c);
    }
    p.labels.push_back(std::move(labels));
  }
  // Guarantee at least one same-class pair for the CASL term.
  p.labels[1].push_back(p.labels[0].front());
  for (auto& l : p.labels) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return p;
}

double objective_value(const GradCheckProblem& p, const ModelParams& params) {
  std::vector<ForwardState> states;
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    states.push_back(forward_with_mask(params, p.inputs[i], p.masks[i], Mode::kTrain));
  }
  return evaluate_objective(params, p.inputs, states, p.labels, p.weights, false).loss.total;
}

}  // namespace

GradCheckReport grad_check(const GradCheckOptions& options) {
  GradCheckReport report;
  Rng rng(options.seed);
  for (double lambda : options.lambdas) {
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      GradCheckProblem p = make_problem(lambda, rng);
      std::vector<ForwardState> states;
      for (std::size_t i = 0; i < p.inputs.size(); ++i) {
        states.push_back(forward_with_mask(p.params, p.inputs[i], p.masks[i], Mode::kTrain));
      }
      ModelParams analytic = evaluate_objective(p.params, p.inputs, states, p.labels, p.weights).grad;
      if (options.corrupt) options.corrupt(analytic);

      GradCheckTrial t{lambda, p.params.dims, p.inputs.size(), {}};
      ModelParams probe = p.params;
      auto probe_blocks = probe.blocks();
      auto analytic_blocks = analytic.blocks();
      for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
        for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
          const double saved = probe_blocks[b][i];
          probe_blocks[b][i] = saved + options.step;
          const double plus = objective_value(p, probe);
          probe_blocks[b][i] = saved - options.step;
          const double minus = objective_value(p, probe);
          probe_blocks[b][i] = saved;
          const double numeric = (plus - minus) / (2.0 * options.step);
          const double a = analytic_blocks[b][i];
          const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
          t.max_rel_error[b] = std::max(t.max_rel_error[b], std::abs(a - numeric) / denom);
        }
        report.max_rel_error[b] = std::max(report.max_rel_error[b], t.max_rel_error[b]);
      }
      report.trials.push_back(t);
    }
  }
  report.passed = true;
  for (double e : report.max_rel_error) report.passed = report.passed && e < options.tolerance;
  return report;
}

}  // namespace wtalc
