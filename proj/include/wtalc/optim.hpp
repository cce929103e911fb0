#pragma once

// Adam, the pair-constrained training loop, and a finite-difference
// gradient checker for evaluate_objective.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wtalc/data.hpp"
#include "wtalc/loss.hpp"
#include "wtalc/model.hpp"

namespace wtalc {

struct TrainConfig {
  double lambda = 0.5;
  double alpha = 5e-4;
  double margin = 0.5;
  std::size_t k_divisor = 8;
  double keep_prob = 0.7;
  double clip_seconds = 320.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 10;
  std::size_t min_pairs = 3;
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 1024;
  std::size_t hidden_dim = 2048;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoints
  std::filesystem::path checkpoint_dir;

  // Throws DomainError naming the first violated constraint.
  void validate() const;
  LossWeights loss_weights() const { return {lambda, alpha, margin, k_divisor}; }
  BatchSpec batch_spec() const { return {batch_size, min_pairs, clip_seconds}; }
};

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ModelParams& params, double beta1 = 0.9, double beta2 = 0.999,
                              double epsilon = 1e-8);
};

// One bias-corrected Adam update in place. Throws DomainError on non-finite
// gradients and ShapeError when shapes disagree.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate);

struct LogRecord {
  std::size_t step = 0;  // 1-based
  LossBreakdown loss;
  bool casl_has_pairs = false;
  std::size_t pair_count = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LogRecord> log;
};

using StepCallback = std::function<void(const LogRecord&)>;

// Runs `config.iterations` steps of batch -> forward -> loss -> gradient ->
// Adam. Throws DivergenceError on a non-finite loss or gradient.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const StepCallback& on_step = {});

// One JSON object per line: step, mill, casl, reg, total, casl_has_pairs, pair_count.
void write_training_log(const std::filesystem::path& path, const std::vector<LogRecord>& log);

struct GradCheckOptions {
  std::size_t trials = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::vector<double> lambdas = {0.0, 0.5, 1.0};
  std::uint64_t seed = 1;
  // Floor for the relative-error denominator, so entries whose true gradient
  // is below finite-difference resolution are compared absolutely.
  double denominator_floor = 1e-6;
  // Test hook: applied to the analytic gradient before comparison.
  std::function<void(ModelParams&)> corrupt;
};

struct GradCheckTrial {
  double lambda = 0.0;
  ModelDims dims;
  std::size_t batch = 0;
  std::array<double, 4> max_rel_error{};  // per parameter block
};

struct GradCheckReport {
  std::vector<GradCheckTrial> trials;
  std::array<double, 4> max_rel_error{};
  bool passed = false;
};

// Each trial draws F in {2,4}, D in {4,8}, n_c in {2,3}, a batch of videos
// with l in [2, 12] and at least one same-class pair, random weights and a
// frozen dropout mask, then compares every analytic gradient entry with a
// central difference.
GradCheckReport grad_check(const GradCheckOptions& options);

}  // namespace wtalc
