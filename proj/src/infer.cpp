#include "wtalc/infer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wtalc/errors.hpp"
#include "wtalc/loss.hpp"

namespace wtalc {

ForwardState forward_eval(const ModelParams& params, const Sequence& features) {
  return forward_with_mask(params, features, Sequence(params.dims.hidden_dim, features.length(), 1.0), Mode::kEval);
}

Vector classify(const ModelParams& params, const Sequence& features, std::size_t k_divisor) {
  return softmax(class_scores(forward_eval(params, features).activations, k_divisor));
}

std::vector<Detection> detections_from_activations(const Sequence& activations, std::span<const double> scores,
                                                   double stride_seconds, double duration_seconds,
                                                   const LocalizeOptions& options) {
  if (scores.size() != activations.dim()) throw ShapeError("localize: one score per class required");
  if (!(stride_seconds > 0.0)) throw DomainError("localize: stride must be positive");
  std::vector<Detection> out;
  const std::size_t length = activations.length();
  for (std::size_t c = 0; c < activations.dim(); ++c) {
    if (!(scores[c] > options.score_threshold)) continue;
    std::size_t t = 0;
    while (t < length) {
      if (!(activations(c, t) > options.act_threshold)) {
        ++t;
        continue;
      }
      const std::size_t first = t;
      double sum = 0.0;
      while (t < length && activations(c, t) > options.act_threshold) sum += activations(c, t++);
      const double start = static_cast<double>(first) * stride_seconds;
      const double end = std::min(static_cast<double>(t) * stride_seconds, duration_seconds);
      if (start < end) out.push_back({start, end, c, sum / static_cast<double>(t - first)});
    }
  }
  return out;
}

std::vector<Detection> localize(const ModelParams& params, const Sequence& features, std::size_t k_divisor,
                                double stride_seconds, double duration_seconds, const LocalizeOptions& options) {
  const ForwardState st = forward_eval(params, features);
  const Vector scores = class_scores(st.activations, k_divisor);
  return detections_from_activations(st.activations, scores, stride_seconds, duration_seconds, options);
}

std::string format_detection(const VideoDetection& d, const LabelVocabulary& vocabulary) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), " %.6f %.6f ", d.detection.start, d.detection.end);
  char conf[64];
  std::snprintf(conf, sizeof(conf), " %.6f", d.detection.confidence);
  return d.video_id + buf + vocabulary.name(d.detection.class_index) + conf;
}

void write_detections(const std::filesystem::path& path, std::span<const VideoDetection> detections,
                      const LabelVocabulary& vocabulary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write detections '" + path.string() + "'");
  for (const auto& d : detections) out << format_detection(d, vocabulary) << '\n';
}

}  // namespace wtalc
