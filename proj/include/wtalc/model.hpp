#pragma once

// The two learned layers: a fully connected feature transform with ReLU and
// inverted dropout, followed by a per-instant projection onto class
// activations that shares its weights along the temporal axis.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>

#include "wtalc/data.hpp"
#include "wtalc/tensor.hpp"

namespace wtalc {

struct ModelDims {
  std::size_t feature_dim = 1024;  // F, per stream
  std::size_t hidden_dim = 2048;   // D
  std::size_t num_classes = 0;     // n_c

  std::size_t input_dim() const noexcept { return 2 * feature_dim; }
  bool operator==(const ModelDims&) const = default;
};

/// Weights of both layers. The same struct carries gradients and Adam moments.
struct ModelParams {
  ModelDims dims;
  Matrix fc_weight;   // D x 2F
  Vector fc_bias;     // D
  Matrix cls_weight;  // n_c x D
  Vector cls_bias;    // n_c

  static ModelParams zeros(const ModelDims& dims);

  // fc_weight, fc_bias, cls_weight, cls_bias, in that order.
  std::array<std::span<double>, 4> blocks();
  std::array<std::span<const double>, 4> blocks() const;

  bool operator==(const ModelParams&) const = default;
};

inline constexpr std::array<const char*, 4> kParamBlockNames = {"fc_weight", "fc_bias", "cls_weight",
                                                                "cls_bias"};

enum class Mode { kTrain, kEval };

struct ForwardState {
  Sequence relu;         // D x l, max(0, W_fc x + b_fc) before dropout
  Sequence mask;         // D x l, entries 0 or 1/k_p; all ones in eval mode
  Sequence hidden;       // D x l, relu .* mask
  Sequence activations;  // n_c x l
  Mode mode = Mode::kEval;
};

// Xavier-uniform weights, zero biases. Throws DomainError on a zero dimension.
ModelParams init_params(const ModelDims& dims, Rng& rng);

// Inverted-dropout mask: 1/keep_prob with probability keep_prob, else 0.
Sequence draw_dropout_mask(std::size_t hidden_dim, std::size_t length, double keep_prob, Rng& rng);

// Throws DomainError for keep_prob outside (0, 1], ShapeError on shape
// mismatch, and DomainError on non-finite input.
ForwardState forward(const ModelParams& params, const Sequence& features, double keep_prob, Mode mode,
                     Rng& rng);

// Deterministic forward with a given mask (used by training and gradient checks).
ForwardState forward_with_mask(const ModelParams& params, const Sequence& features, Sequence mask,
                               Mode mode);

// Parameter file: "WTALCPRM", u32 version, u32 F, u32 D, u32 n_c,
// u32 vocabulary size, length-prefixed names, then float64 row-major blocks.
void save_params(const std::filesystem::path& path, const ModelParams& params,
                 const LabelVocabulary& vocabulary);

struct LoadedModel {
  ModelParams params;
  LabelVocabulary vocabulary;
};

LoadedModel load_params(const std::filesystem::path& path);

}  // namespace wtalc
