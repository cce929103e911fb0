#pragma once

// Video-level classification and two-stage threshold localisation.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wtalc/data.hpp"
#include "wtalc/model.hpp"

namespace wtalc {

struct Detection {
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds, exclusive
  std::size_t class_index = 0;
  double confidence = 0.0;
};

struct LocalizeOptions {
  double score_threshold = 0.0;  // on pooled (pre-softmax) class scores
  double act_threshold = 0.0;    // on raw class activations
};

// Eval-mode forward (no dropout).
ForwardState forward_eval(const ModelParams& params, const Sequence& features);

// Softmax over k-max pooled class scores.
Vector classify(const ModelParams& params, const Sequence& features, std::size_t k_divisor);

// Stage 1 keeps classes whose pooled score exceeds score_threshold. Stage 2
// thresholds each kept class's activation row; each maximal run of
// above-threshold instants [t0, t1] becomes [t0 * stride, min((t1 + 1) * stride, duration))
// with confidence equal to the mean activation over the run. Output is
// ordered by class, then start.
std::vector<Detection> detections_from_activations(const Sequence& activations, std::span<const double> scores,
                                                   double stride_seconds, double duration_seconds,
                                                   const LocalizeOptions& options);

std::vector<Detection> localize(const ModelParams& params, const Sequence& features, std::size_t k_divisor,
                                double stride_seconds, double duration_seconds, const LocalizeOptions& options);

struct VideoDetection {
  std::string video_id;
  Detection detection;
};

// "<video_id> <start> <end> <class_name> <confidence>" per line, numbers with 6 decimals.
void write_detections(const std::filesystem::path& path, std::span<const VideoDetection> detections,
                      const LabelVocabulary& vocabulary);
std::string format_detection(const VideoDetection& detection, const LabelVocabulary& vocabulary);

}  // namespace wtalc
