#pragma once

// k-max multiple-instance loss, co-activity similarity loss, their weighted
// combination with L2 regularisation, and exact gradients of the total with
// respect to every parameter block.

#include <cstddef>
#include <span>
#include <vector>

#include "wtalc/model.hpp"
#include "wtalc/tensor.hpp"

namespace wtalc {

struct LossWeights {
  double lambda = 0.5;         // weight of the MIL loss; 1 - lambda goes to CASL
  double alpha = 5e-4;         // L2 weight on fc_weight and cls_weight (biases excluded)
  double margin = 0.5;         // ranking hinge margin
  std::size_t k_divisor = 8;   // k = max(1, floor(l / k_divisor))
};

// Floor applied to probabilities inside the cross-entropy log.
inline constexpr double kProbabilityFloor = 1e-12;
// Added to <f, f> before the square root in cosine norms.
inline constexpr double kNormEpsilon = 1e-8;

std::size_t select_k(std::size_t length, std::size_t divisor);

// Indices of the k largest entries, ordered by (value desc, index asc).
// Throws DomainError unless 1 <= k <= row.size().
std::vector<std::size_t> top_k_indices(std::span<const double> row, std::size_t k);

// Mean of the k largest entries of `row`.
double kmax_pool(std::span<const double> row, std::size_t k);

Vector softmax(std::span<const double> x);

// Uniform pmf over `labels`; throws DomainError for an empty set or an index >= num_classes.
Vector label_pmf(const LabelSet& labels, std::size_t num_classes);

struct PooledScores {
  std::size_t k = 1;
  Vector scores;   // k-max pooled activation per class
  Vector probs;    // softmax over classes
  Vector target;   // normalised multi-hot labels
  std::vector<std::vector<std::size_t>> selected;  // per class, instants chosen by k-max
};

// Pooled class scores only (no labels needed). Used at inference time.
Vector class_scores(const Sequence& activations, std::size_t k_divisor);

PooledScores pool_scores(const Sequence& activations, const LabelSet& labels, std::size_t k_divisor);

double cross_entropy(const PooledScores& pooled);

// Mean cross-entropy over the batch. Throws DomainError for an empty batch.
double mill(std::span<const PooledScores> pooled);

// Temporal softmax of each class row (n_c x l in, n_c x l out).
Sequence attention(const Sequence& activations);

struct AttentionPair {
  Vector high;  // attention-weighted mean of hidden columns
  Vector low;   // (1 - attention)-weighted, normalised by l - 1
};

// Throws DomainError when the sequence has a single instant (low is undefined).
AttentionPair attention_features(const Sequence& hidden, std::span<const double> attention_row);

// 1 - cosine similarity, with kNormEpsilon inside both norms. Range [0, 2].
double cosine_distance(std::span<const double> f, std::span<const double> g);

// Two-sided ranking hinge between videos m and n for one shared class.
double pair_loss(const AttentionPair& m, const AttentionPair& n, double margin);

struct CaslResult {
  double value = 0.0;
  bool has_pairs = false;         // false: no class had two eligible videos, value is 0
  std::size_t active_classes = 0;
  std::size_t pair_terms = 0;
};

// Per-batch co-activity similarity loss. Videos with a single instant are
// skipped; classes without an in-batch pair do not count in the class average.
CaslResult casl(std::span<const ForwardState> states, std::span<const LabelSet> labels, double margin);

struct LossBreakdown {
  double mill = 0.0;
  double casl = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

// ||fc_weight||_F^2 + ||cls_weight||_F^2
double weight_norm_sq(const ModelParams& params);

LossBreakdown total_loss(double mill_value, double casl_value, const ModelParams& params, double lambda,
                         double alpha);

struct Objective {
  LossBreakdown loss;
  bool casl_has_pairs = false;
  ModelParams grad;  // empty blocks when gradients were not requested
};

// Evaluates the total loss of a batch whose forward passes are in `states`
// (computed from `inputs` with their recorded masks) and, if requested, its
// gradient. k-max routes 1/k of the score gradient to each selected instant;
// hinge and ReLU use a zero subgradient at the kink. The CASL gradient is
// skipped when lambda == 1.
Objective evaluate_objective(const ModelParams& params, std::span<const Sequence> inputs,
                             std::span<const ForwardState> states, std::span<const LabelSet> labels,
                             const LossWeights& weights, bool with_gradient = true);

}  // namespace wtalc
