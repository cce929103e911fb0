#include "wtalc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "wtalc/errors.hpp"

namespace wtalc {
namespace fs = std::filesystem;

namespace {

constexpr int kPrototypeAttempts = 1000;

std::vector<Vector> draw_prototypes(std::size_t count, std::size_t dim, double separation, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < kPrototypeAttempts; ++attempt) {
    std::vector<Vector> protos(count, Vector(dim));
    for (auto& p : protos) {
      double norm = 0.0;
      for (double& v : p) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : p) v /= norm;
    }
    bool ok = true;
    for (std::size_t a = 0; a < count && ok; ++a) {
      for (std::size_t b = a + 1; b < count && ok; ++b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d2 += (protos[a][i] - protos[b][i]) * (protos[a][i] - protos[b][i]);
        ok = std::sqrt(d2) >= separation;
      }
    }
    if (ok) return protos;
  }
  throw DomainError("synth: could not draw " + std::to_string(count) + " prototypes with separation " +
                    std::to_string(separation) + " in " + std::to_string(dim) + " dimensions");
}

struct PlannedSegment {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t category = 0;
};

std::vector<PlannedSegment> plan_segments(std::size_t length, const SynthConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<std::size_t> count_dist(1, cfg.segments_per_video);
  std::uniform_int_distribution<std::size_t> class_dist(0, cfg.num_classes - 1);
  const std::size_t count = std::min(count_dist(rng), std::max<std::size_t>(1, length / 4));
  const std::size_t lo = std::max<std::size_t>(2, length / 8);
  const std::size_t hi = std::max(lo, length / 4);
  std::uniform_int_distribution<std::size_t> len_dist(lo, hi);

  std::vector<PlannedSegment> segs(count);
  std::size_t occupied = count - 1;  // one background instant between neighbours
  for (auto& s : segs) {
    s.length = len_dist(rng);
    s.category = class_dist(rng);
    occupied += s.length;
  }
  while (occupied > length) {
    auto longest = std::max_element(segs.begin(), segs.end(),
                                    [](const auto& a, const auto& b) { return a.length < b.length; });
    --longest->length;
    --occupied;
  }
  // Spread the free instants over the count + 1 gaps.
  const std::size_t free = length - occupied;
  std::uniform_int_distribution<std::size_t> cut_dist(0, free);
  std::vector<std::size_t> cuts(count);
  for (auto& c : cuts) c = cut_dist(rng);
  std::sort(cuts.begin(), cuts.end());
  std::size_t cursor = 0;
  std::size_t previous_cut = 0;
  for (std::size_t i = 0; i < count; ++i) {
    cursor += cuts[i] - previous_cut;
    previous_cut = cuts[i];
    segs[i].start = cursor;
    cursor += segs[i].length + 1;
  }
  return segs;
}

std::string video_id(Split split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu", split == Split::kTrain ? "train" : "test", i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 1 || num_train + num_test < 1 || feature_dim < 1 || mean_length < 2 || segments_per_video < 1) {
    throw DomainError("synth: counts and dimensions must be at least 1 (mean_length at least 2)");
  }
  if (!(separation > 0.0)) throw DomainError("synth: separation must be positive");
  if (!(noise_sigma >= 0.0)) throw DomainError("synth: noise sigma must be non-negative");
  if (!(stride_seconds > 0.0)) throw DomainError("synth: stride must be positive");
}

SynthOutput synth_generate(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t dim = 2 * cfg.feature_dim;

  SynthOutput out;
  out.features_dir = out_dir / "features";
  out.manifest = out_dir / "manifest.txt";
  out.ground_truth = out_dir / "ground_truth.txt";
  out.ground_truth_train = out_dir / "ground_truth_train.txt";
  fs::create_directories(out.features_dir);

  std::vector<std::string> names;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "activity_%02zu", c);
    names.emplace_back(buf);
  }
  out.vocabulary = LabelVocabulary(names);
  out.prototypes = draw_prototypes(cfg.num_classes + 1, dim, cfg.separation, rng);
  const Vector& background = out.prototypes.back();

  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  std::uniform_int_distribution<std::size_t> length_dist(std::max<std::size_t>(2, cfg.mean_length / 2),
                                                         cfg.mean_length + cfg.mean_length / 2);
  std::ofstream manifest(out.manifest, std::ios::trunc);
  if (!manifest) throw FormatError("cannot write '" + out.manifest.string() + "'");
  manifest << "# id rgb flow labels stride_seconds duration_seconds split\n";

  std::vector<GroundTruthSegment> test_gt;
  std::vector<GroundTruthSegment> train_gt;
  for (Split split : {Split::kTrain, Split::kTest}) {
    const std::size_t count = split == Split::kTrain ? cfg.num_train : cfg.num_test;
    for (std::size_t i = 0; i < count; ++i) {
      SynthVideo v;
      v.id = video_id(split, i);
      v.split = split;
      v.length = length_dist(rng);
      const auto segs = plan_segments(v.length, cfg, rng);

      std::vector<const Vector*> column_proto(v.length, &background);
      for (const auto& s : segs) {
        for (std::size_t t = s.start; t < s.start + s.length; ++t) column_proto[t] = &out.prototypes[s.category];
        v.labels.push_back(s.category);
        v.segments.push_back({v.id, static_cast<double>(s.start) * cfg.stride_seconds,
                              static_cast<double>(s.start + s.length) * cfg.stride_seconds, s.category});
      }
      std::sort(v.labels.begin(), v.labels.end());
      v.labels.erase(std::unique(v.labels.begin(), v.labels.end()), v.labels.end());

      Sequence rgb(cfg.feature_dim, v.length);
      Sequence flow(cfg.feature_dim, v.length);
      for (std::size_t t = 0; t < v.length; ++t) {
        const Vector& p = *column_proto[t];
        for (std::size_t r = 0; r < cfg.feature_dim; ++r) {
          rgb(r, t) = p[r] * cfg.activity_scale + (cfg.noise_sigma > 0.0 ? noise(rng) : 0.0);
        }
        for (std::size_t r = 0; r < cfg.feature_dim; ++r) {
          flow(r, t) = p[cfg.feature_dim + r] * cfg.activity_scale + (cfg.noise_sigma > 0.0 ? noise(rng) : 0.0);
        }
      }
      const std::string rgb_name = v.id + "_rgb.bin";
      const std::string flow_name = v.id + "_flow.bin";
      write_feature_file(out.features_dir / rgb_name, rgb);
      write_feature_file(out.features_dir / flow_name, flow);

      std::string labels;
      for (std::size_t c : v.labels) labels += (labels.empty() ? "" : ",") + out.vocabulary.name(c);
      char nums[96];
      std::snprintf(nums, sizeof(nums), " %.6f %.6f ", cfg.stride_seconds,
                    static_cast<double>(v.length) * cfg.stride_seconds);
      manifest << v.id << ' ' << rgb_name << ' ' << flow_name << ' ' << labels << nums
               << (split == Split::kTrain ? "train" : "test") << '\n';

      auto& gt = split == Split::kTrain ? train_gt : test_gt;
      gt.insert(gt.end(), v.segments.begin(), v.segments.end());
      out.videos.push_back(std::move(v));
    }
  }
  manifest.close();
  if (!manifest) throw FormatError("short write to '" + out.manifest.string() + "'");
  write_ground_truth(out.ground_truth, test_gt, out.vocabulary);
  write_ground_truth(out.ground_truth_train, train_gt, out.vocabulary);
  return out;
}

}  // namespace wtalc
