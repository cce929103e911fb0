#pragma once

// Feature files, label manifests, long-video clip sampling and
// pair-constrained batch assembly.
//
// Manifest: one video per line, whitespace separated:
//
//   <id> <rgb-file> <flow-file> <labels> <stride-seconds> <duration-seconds> [split]
//
// <labels> is a comma-separated list of category names, or "-" for an
// unlabelled video. Feature paths are relative to the features directory.
// [split] is "train" (default) or "test". Blank lines and lines starting with
// '#' are ignored.
//
// Feature file: u32 F, u32 l (little-endian), then F*l little-endian float32
// values, column-major (the F values of instant 0 first).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wtalc/tensor.hpp"

namespace wtalc {

class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  // Throws DomainError on empty or duplicate names. Order is preserved.
  explicit LabelVocabulary(std::vector<std::string> categories);

  std::size_t size() const noexcept { return categories_.size(); }
  const std::string& name(std::size_t index) const { return categories_.at(index); }
  const std::vector<std::string>& names() const noexcept { return categories_; }
  std::optional<std::size_t> find(const std::string& name) const;
  // Throws FormatError for an unknown name.
  std::size_t index_of(const std::string& name) const;

  bool operator==(const LabelVocabulary&) const = default;

 private:
  std::vector<std::string> categories_;
};

enum class Split { kTrain, kTest };

struct VideoRecord {
  std::string id;
  std::filesystem::path rgb_path;   // resolved against the features directory
  std::filesystem::path flow_path;
  LabelSet labels;
  double feature_stride_seconds = 1.0;
  double duration_seconds = 0.0;
  Split split = Split::kTrain;
  // Read from the feature file headers while indexing.
  std::size_t feature_dim = 0;
  std::size_t length = 0;
};

struct DatasetIndex {
  LabelVocabulary vocabulary;
  std::vector<VideoRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  // Records of one split, sharing the vocabulary.
  DatasetIndex filter(Split split) const;
};

struct VideoFeatures {
  Sequence rgb;
  Sequence flow;
};

struct FeatureHeader {
  std::size_t feature_dim = 0;
  std::size_t length = 0;
};

void write_feature_file(const std::filesystem::path& path, const Sequence& features);
Sequence read_feature_file(const std::filesystem::path& path);
FeatureHeader read_feature_header(const std::filesystem::path& path);

// Parses the manifest and validates every referenced feature file's header
// and size (feature data itself is read later by load_features). The
// vocabulary is the sorted union of all label names in the manifest.
DatasetIndex load_manifest(const std::filesystem::path& manifest_path,
                           const std::filesystem::path& features_dir);

VideoFeatures load_features(const VideoRecord& record);

// [rgb; flow] stacked along the feature axis: 2F x l.
Sequence concat_streams(const VideoFeatures& features);

// An index with the concatenated features of every record in memory.
struct Dataset {
  DatasetIndex index;
  std::vector<Sequence> features;

  std::size_t size() const noexcept { return features.size(); }
  std::size_t input_dim() const { return features.empty() ? 0 : features.front().dim(); }
};

// Throws ShapeError if videos disagree on the feature dimension.
Dataset load_dataset(DatasetIndex index);

// Clip cap in instants for a video sampled every `stride_seconds`: floor(T / stride), at least 1.
std::size_t clip_instants(double clip_seconds, double stride_seconds);

struct Clip {
  Sequence features;
  LabelSet labels;
  std::size_t start = 0;  // first instant taken from the source video
};

// Identity when the video fits in `max_length`; otherwise a contiguous
// window of exactly `max_length` instants with a uniformly drawn start. The
// whole-video label set is kept either way.
Clip sample_clip(const Sequence& features, const LabelSet& labels, std::size_t max_length, Rng& rng);

struct BatchItem {
  std::size_t video = 0;  // index into the dataset
  Clip clip;
};

struct Batch {
  std::vector<BatchItem> items;
  // Number of unordered item pairs sharing at least one category.
  std::size_t pair_count = 0;
};

struct BatchSpec {
  std::size_t batch_size = 10;
  std::size_t min_pairs = 3;
  double clip_seconds = 320.0;
};

std::size_t count_shared_pairs(const std::vector<BatchItem>& items);

// Draws `min_pairs` same-category pairs (anchor category uniform over those
// with two or more videos), then fills the remaining slots uniformly. Videos
// are not repeated inside a batch unless the dataset is too small. Throws
// DegenerateDatasetError when no category has two videos.
Batch build_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng);

}  // namespace wtalc
