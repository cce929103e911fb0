#pragma once

// Temporal IoU, detection mAP over IoU thresholds, and classification mAP.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wtalc/data.hpp"
#include "wtalc/infer.hpp"

namespace wtalc {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// |a ∩ b| / |a ∪ b|. Throws DomainError unless start < end for both.
double temporal_iou(Interval a, Interval b);

struct GroundTruthSegment {
  std::string video_id;
  double start = 0.0;
  double end = 0.0;
  std::size_t class_index = 0;
};

// All-point interpolated AP of a ranked hit list against `num_positives`
// relevant items: sum over hits of (1 / num_positives) * max precision at
// or below that rank.
double average_precision(std::span<const bool> ranked_hits, std::size_t num_positives);

struct DetectionMap {
  std::vector<double> thresholds;
  std::vector<double> mean_ap;  // per threshold, over classes with ground truth
  // [threshold][class]; nullopt for classes without ground truth.
  std::vector<std::vector<std::optional<double>>> class_ap;
};

// Per class and threshold: detections ranked by confidence (ties: earlier
// start first), each matched to the unmatched same-video ground truth of
// its class with the highest IoU >= threshold.
DetectionMap detection_map(std::span<const VideoDetection> detections,
                           std::span<const GroundTruthSegment> ground_truth,
                           std::span<const double> iou_thresholds, std::size_t num_classes);

// 0.5, 0.55, ..., 0.95
std::vector<double> activitynet_thresholds();

double mean_over_thresholds(const DetectionMap& result);

// Per class, videos ranked by that class's pmf entry (ties: input order).
// Classes without a positive video are excluded.
double classification_map(std::span<const Vector> pmfs, std::span<const LabelSet> labels);

// Text line formats shared with the detection writer.
struct SegmentRecord {
  std::string video_id;
  double start = 0.0;
  double end = 0.0;
  std::string class_name;
  double confidence = 0.0;
};

// Reads "<video_id> <start> <end> <class_name>[ <confidence>]" lines.
std::vector<SegmentRecord> read_segment_file(const std::filesystem::path& path, bool with_confidence);

void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthSegment> segments,
                        const LabelVocabulary& vocabulary);

std::vector<GroundTruthSegment> to_ground_truth(std::span<const SegmentRecord> records,
                                                const LabelVocabulary& vocabulary);
std::vector<VideoDetection> to_detections(std::span<const SegmentRecord> records,
                                          const LabelVocabulary& vocabulary);

// Human-readable table and "key=value" lines (map@0.50=..., ap@0.50/<class>=..., map_avg=...).
std::string format_results_table(const DetectionMap& result, const LabelVocabulary& vocabulary);
std::string format_results_kv(const DetectionMap& result, const LabelVocabulary& vocabulary);

}  // namespace wtalc
