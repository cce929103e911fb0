#pragma once

// Synthetic untrimmed videos with planted activity segments, written in the
// same manifest / feature / ground-truth formats real data uses.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "wtalc/data.hpp"
#include "wtalc/eval.hpp"

namespace wtalc {

struct SynthConfig {
  std::size_t num_classes = 4;
  std::size_t num_train = 40;
  std::size_t num_test = 20;
  std::size_t feature_dim = 32;        // F per stream; prototypes live in 2F dimensions
  std::size_t mean_length = 64;        // instants; lengths are uniform in [mean/2, 3*mean/2]
  std::size_t segments_per_video = 2;  // each video gets 1..segments_per_video segments
  double separation = 1.0;             // minimum pairwise distance between prototypes
  double noise_sigma = 0.1;
  double activity_scale = 1.0;
  double stride_seconds = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthVideo {
  std::string id;
  Split split = Split::kTrain;
  std::size_t length = 0;
  LabelSet labels;
  std::vector<GroundTruthSegment> segments;
};

struct SynthOutput {
  std::filesystem::path manifest;           // all videos, with a split column
  std::filesystem::path features_dir;
  std::filesystem::path ground_truth;       // test split
  std::filesystem::path ground_truth_train; // train split
  LabelVocabulary vocabulary;
  std::vector<Vector> prototypes;           // one per class, then background
  std::vector<SynthVideo> videos;
};

// Throws DomainError if prototypes with the requested separation cannot be
// drawn within a bounded number of attempts.
SynthOutput synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace wtalc
